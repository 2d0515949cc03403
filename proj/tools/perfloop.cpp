#include <iostream>

#include "perfloop/gateway.hpp"

int main(int argc, char** argv) { return perfloop::gateway::cli_main(argc, argv, std::cout, std::cerr); }
