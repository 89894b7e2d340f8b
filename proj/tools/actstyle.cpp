#include "actstyle/cli.hpp"

int main(int argc, char** argv) { return actstyle::cli::run(argc, argv); }
