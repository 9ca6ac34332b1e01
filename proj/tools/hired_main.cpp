#include <iostream>

#include "hired/app.hpp"

int main(int argc, char** argv) {
    return hired::run_cli(argc, argv, std::cout, std::cerr);
}
