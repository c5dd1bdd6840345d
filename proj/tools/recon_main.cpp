#include <string>
#include <vector>

#include "recon/cli.hpp"

int main(int argc, char** argv) {
    return recon::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
