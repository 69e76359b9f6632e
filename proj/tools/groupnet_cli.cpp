#include "groupnet/commands.hpp"

int main(int argc, char** argv) { return groupnet::run_cli(argc, argv, std::cout, std::cerr); }
