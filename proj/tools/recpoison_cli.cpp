#include "recpoison/cli.hpp"

int main(int argc, char** argv) { return recpoison::run_cli(argc, argv); }
