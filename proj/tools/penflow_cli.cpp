#include "penflow/io.hpp"

int main(int argc, char** argv) { return penflow::cli_main(argc, argv); }
