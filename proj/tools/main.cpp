#include "cli.hpp"

int main(int argc, char** argv) { return bathy::cli::run(argc, argv); }
