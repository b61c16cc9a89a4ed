#include "mixagent/nn/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixagent/hash.hpp"
#include "mixagent/rng.hpp"

namespace mixagent::nn {

using nlohmann::json;

void Descriptor::validate() const {
    if (layers < 1 || d_model < 1 || heads < 1 || d_ff < 1 || input_dim < 1 || output_dim < 1 || max_context < 1)
        throw DescriptorInvalid("descriptor fields must be positive");
    if (d_model % heads != 0) throw DescriptorInvalid("d_model must be divisible by heads");
}

Mat& NetworkParams::add(const std::string& name, Mat m) {
    if (has(name)) throw DescriptorInvalid("duplicate tensor name: " + name);
    tensors_.emplace_back(name, std::move(m));
    return tensors_.back().second;
}

Mat& NetworkParams::at(const std::string& name) {
    for (auto& [n, m] : tensors_)
        if (n == name) return m;
    throw ShapeMismatch("no tensor named " + name);
}

const Mat& NetworkParams::at(const std::string& name) const {
    for (const auto& [n, m] : tensors_)
        if (n == name) return m;
    throw ShapeMismatch("no tensor named " + name);
}

bool NetworkParams::has(const std::string& name) const {
    for (const auto& [n, m] : tensors_)
        if (n == name) return true;
    return false;
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
    return n;
}

bool NetworkParams::all_finite() const {
    for (const auto& [name, m] : tensors_)
        if (!m.allFinite()) return false;
    return true;
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams out(desc_);
    for (const auto& [n, m] : tensors_) out.add(n, Mat::Zero(m.rows(), m.cols()));
    return out;
}

namespace {
json descriptor_to_json(const Descriptor& d) {
    const char* head = d.head == Head::Linear ? "linear" : d.head == Head::Softmax ? "softmax" : "sigmoid_scalar";
    return {{"layers", d.layers},     {"d_model", d.d_model},         {"heads", d.heads},
            {"d_ff", d.d_ff},         {"input_dim", d.input_dim},     {"output_dim", d.output_dim},
            {"max_context", d.max_context}, {"head", head},           {"zero_output_head", d.zero_output_head}};
}

Descriptor descriptor_from_json(const json& j) {
    Descriptor d;
    d.layers = j.at("layers").get<int>();
    d.d_model = j.at("d_model").get<int>();
    d.heads = j.at("heads").get<int>();
    d.d_ff = j.at("d_ff").get<int>();
    d.input_dim = j.at("input_dim").get<int>();
    d.output_dim = j.at("output_dim").get<int>();
    d.max_context = j.at("max_context").get<int>();
    const std::string h = j.at("head").get<std::string>();
    if (h == "linear")
        d.head = Head::Linear;
    else if (h == "softmax")
        d.head = Head::Softmax;
    else if (h == "sigmoid_scalar")
        d.head = Head::SigmoidScalar;
    else
        throw CheckpointInvalid("unknown head: " + h);
    d.zero_output_head = j.at("zero_output_head").get<bool>();
    d.validate();
    return d;
}
}  // namespace

std::string NetworkParams::checkpoint_json() const {
    json tensors = json::array();
    for (const auto& [name, m] : tensors_) {
        std::vector<double> data(m.data(), m.data() + m.size());
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", data}});
    }
    json body{{"version", 1}, {"descriptor", descriptor_to_json(desc_)}, {"tensors", tensors}};
    const std::string payload = body.dump();
    json wrapped{{"hash", content_hash(payload)}, {"body", std::move(body)}};
    return wrapped.dump();
}

NetworkParams NetworkParams::from_checkpoint_json(const std::string& text) {
    json wrapped;
    try {
        wrapped = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointInvalid(std::string("checkpoint parse: ") + e.what());
    }
    if (!wrapped.contains("hash") || !wrapped.contains("body")) throw CheckpointInvalid("missing hash/body");
    const json& body = wrapped.at("body");
    if (wrapped.at("hash").get<std::string>() != content_hash(body.dump()))
        throw CheckpointInvalid("checkpoint hash mismatch");
    NetworkParams out(descriptor_from_json(body.at("descriptor")));
    for (const auto& t : body.at("tensors")) {
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        const auto data = t.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw CheckpointInvalid("tensor size mismatch");
        Mat m(rows, cols);
        std::copy(data.begin(), data.end(), m.data());
        out.add(t.at("name").get<std::string>(), std::move(m));
    }
    return out;
}

void NetworkParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << checkpoint_json() << '\n';
}

NetworkParams NetworkParams::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointInvalid("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_checkpoint_json(ss.str());
}

namespace {
Mat random_mat(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}
}  // namespace

NetworkParams init_params(const Descriptor& desc, std::uint64_t seed) {
    desc.validate();
    Rng rng(derive_seed(seed, "init_params"));
    NetworkParams p(desc);
    const int d = desc.d_model;
    const int dk = d / desc.heads;
    auto xavier = [](Eigen::Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };

    p.add("in.w", random_mat(desc.input_dim, d, xavier(desc.input_dim), rng));
    p.add("in.b", Mat::Zero(1, d));
    for (int l = 0; l < desc.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        p.add(pre + "ln1.g", Mat::Ones(1, d));
        p.add(pre + "ln1.b", Mat::Zero(1, d));
        for (int h = 0; h < desc.heads; ++h) {
            const std::string hs = std::to_string(h);
            p.add(pre + "attn.wq" + hs, random_mat(d, dk, xavier(d), rng));
            p.add(pre + "attn.wk" + hs, random_mat(d, dk, xavier(d), rng));
            p.add(pre + "attn.wv" + hs, random_mat(d, dk, xavier(d), rng));
            p.add(pre + "attn.wo" + hs, random_mat(dk, d, xavier(dk), rng));
        }
        p.add(pre + "attn.bo", Mat::Zero(1, d));
        p.add(pre + "ln2.g", Mat::Ones(1, d));
        p.add(pre + "ln2.b", Mat::Zero(1, d));
        p.add(pre + "ffn.w1", random_mat(d, desc.d_ff, xavier(d), rng));
        p.add(pre + "ffn.b1", Mat::Zero(1, desc.d_ff));
        p.add(pre + "ffn.w2", random_mat(desc.d_ff, d, xavier(desc.d_ff), rng));
        p.add(pre + "ffn.b2", Mat::Zero(1, d));
    }
    p.add("final_ln.g", Mat::Ones(1, d));
    p.add("final_ln.b", Mat::Zero(1, d));
    if (desc.zero_output_head) {
        p.add("head.w", Mat::Zero(d, desc.output_dim));
    } else {
        p.add("head.w", random_mat(d, desc.output_dim, xavier(d), rng));
    }
    p.add("head.b", Mat::Zero(1, desc.output_dim));
    return p;
}

}  // namespace mixagent::nn
