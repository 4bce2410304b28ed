#include <iostream>

#include "poissonize/app.hpp"

int main(int argc, char** argv) { return poissonize::app::run(argc, argv, std::cout, std::cerr); }
