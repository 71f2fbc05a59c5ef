#include <iostream>

#include "netlqr/commands.hpp"

int main(int argc, char** argv) { return netlqr::run_cli(argc, argv, std::cout, std::cerr); }
