#include "mprl/cli.hpp"

int main(int argc, char** argv) { return mprl::cli_main(argc, argv); }
