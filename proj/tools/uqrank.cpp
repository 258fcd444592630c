#include "uqrank/cli.hpp"

int main(int argc, char** argv) { return uqrank::cli_dispatch(argc, argv); }
