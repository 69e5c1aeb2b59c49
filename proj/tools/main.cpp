#include "vceval/commands.hpp"

int main(int argc, char** argv) { return vceval::cli::run(argc, argv); }
