#include "psfunmix/cli.hpp"

int main(int argc, char** argv) { return psfunmix::cli::run(argc, argv); }
