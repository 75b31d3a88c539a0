#include "vch/shell.hpp"

int main(int argc, char** argv) { return vch::shell::run_cli(argc, argv); }
