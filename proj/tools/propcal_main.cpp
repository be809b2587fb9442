#include "propcal/cli.hpp"

int main(int argc, char** argv) { return propcal::cli::run(argc, argv); }
