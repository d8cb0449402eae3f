#include "traitwave/cli.hpp"

int main(int argc, char** argv) { return traitwave::cli::run(argc, argv); }
