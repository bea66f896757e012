#include "perfsig_cli.hpp"

int main(int argc, char** argv) {
    return perfsig::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
