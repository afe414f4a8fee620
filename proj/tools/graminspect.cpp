#include <vector>

#include "graminspect/cli.hpp"

int main(int argc, char** argv) {
    return graminspect::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
