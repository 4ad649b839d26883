#include "cli.hpp"

int main(int argc, char** argv) { return lqe::cli::run(argc, argv); }
