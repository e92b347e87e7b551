#include "lfg/cli.hpp"

int main(int argc, char** argv) { return lfg::cli_dispatch(argc, argv); }
