#include "infantprints/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return infantprints::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
