#include "bridgecat/cli.hpp"

int main(int argc, char** argv) { return bridgecat::cli_main(argc, argv); }
