#include "gridrel/cli.hpp"

int main(int argc, char** argv) { return gridrel::cli::run(argc, argv); }
