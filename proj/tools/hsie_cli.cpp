#include "hsie/commands.hpp"

int main(int argc, char** argv) { return hsie::run_cli(argc, argv); }
