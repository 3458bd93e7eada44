#include "greendc/cli.hpp"

int main(int argc, char** argv) { return greendc::run_cli(argc, argv); }
