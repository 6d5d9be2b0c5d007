#include <iostream>

#include "jslam/cli/cli.hpp"

int main(int argc, char** argv) { return jslam::run_cli({argv, argv + argc}, std::cout, std::cerr); }
