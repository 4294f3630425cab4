#include <iostream>

#include "prefrank/runner/cli.hpp"

int main(int argc, char** argv) { return prefrank::runner::RunCli(argc, argv, std::cout, std::cerr); }
