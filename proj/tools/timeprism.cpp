#include <iostream>
#include <string>
#include <vector>

#include "prism/cli.hpp"

int main(int argc, char** argv)
{
    return prism::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
