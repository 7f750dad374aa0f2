#include "tbd/cli.hpp"

int main(int argc, char** argv) { return tbd::run_cli(argc, argv); }
