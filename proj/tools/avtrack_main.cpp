#include "avtrack/cli.hpp"

int main(int argc, char** argv) { return avtrack::run_cli(argc, argv); }
