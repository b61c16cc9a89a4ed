#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixagent/errors.hpp"

namespace mixagent::nn {

using Mat = Eigen::MatrixXd;

enum class Head { Linear, Softmax, SigmoidScalar };

struct Descriptor {
    int layers = 2;
    int d_model = 32;
    int heads = 4;
    int d_ff = 128;
    int input_dim = 8;
    int output_dim = 6;
    int max_context = 128;
    Head head = Head::Softmax;
    bool zero_output_head = false;

    void validate() const;
    bool operator==(const Descriptor&) const = default;
};

// Flat ordered named-tensor container plus its architecture descriptor.
class NetworkParams {
  public:
    NetworkParams() = default;
    explicit NetworkParams(Descriptor desc) : desc_(std::move(desc)) {}

    const Descriptor& descriptor() const { return desc_; }
    Mat& add(const std::string& name, Mat m);
    Mat& at(const std::string& name);
    const Mat& at(const std::string& name) const;
    bool has(const std::string& name) const;

    const std::vector<std::pair<std::string, Mat>>& tensors() const { return tensors_; }
    std::vector<std::pair<std::string, Mat>>& tensors() { return tensors_; }

    std::size_t parameter_count() const;
    bool all_finite() const;

    // Same names and shapes, all zero; gradient accumulators.
    NetworkParams zeros_like() const;

    std::string checkpoint_json() const;  // descriptor header + tensors + content hash
    static NetworkParams from_checkpoint_json(const std::string& text);
    void save(const std::string& path) const;
    static NetworkParams load(const std::string& path);

  private:
    Descriptor desc_;
    std::vector<std::pair<std::string, Mat>> tensors_;
};

// Deterministic scaled-normal initialization of the decoder parameter set
// for a descriptor. Layout (per layer i):
//   in.w, in.b, layer{i}.ln1.{g,b}, layer{i}.attn.{wq,wk,wv,wo}{h},
//   layer{i}.attn.bo, layer{i}.ln2.{g,b}, layer{i}.ffn.{w1,b1,w2,b2},
//   final_ln.{g,b}, head.w, head.b
NetworkParams init_params(const Descriptor& desc, std::uint64_t seed);

}  // namespace mixagent::nn
