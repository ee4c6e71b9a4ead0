#include "cli.hpp"

int main(int argc, char** argv) { return difflab::cli::run(argc, argv); }
