#include "cli.hpp"

int main(int argc, char** argv) { return glowgs::cli::run(argc, argv); }
