#include "mixagent/cli/commands.hpp"

int main(int argc, char** argv) { return mixagent::cli::run(argc, argv); }
