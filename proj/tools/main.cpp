#include "ppflow/cli.hpp"

int main(int argc, char** argv) { return ppflow::run_command(argc, argv); }
