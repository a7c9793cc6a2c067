#include "vol/harness/cli.hpp"

int main(int argc, char** argv) { return vol::cli_main(argc, argv); }
