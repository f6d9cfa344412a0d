#include "rankscope/cli.hpp"

int main(int argc, char** argv) { return rankscope::cli::run(argc, argv); }
