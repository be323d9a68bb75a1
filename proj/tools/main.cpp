#include "aghq/cli.hpp"

int main(int argc, char **argv) { return aghq::cli::run(argc, argv); }
