#include <iostream>

#include "qtrans/cli/app.hpp"

int main(int argc, char** argv) { return qtrans::cli::run(argc, argv, std::cout, std::cerr); }
