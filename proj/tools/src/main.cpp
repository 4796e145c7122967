#include "commands.hpp"

int main(int argc, char** argv) { return segtrack::cli::main_entry(argc, argv); }
