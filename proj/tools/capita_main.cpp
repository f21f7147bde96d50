#include "commands.hpp"

int main(int argc, char** argv) { return capita::cli::run(argc, argv); }
