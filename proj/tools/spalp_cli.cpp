#include "spalp/cli.hpp"

int main(int argc, char** argv) { return spalp::cli::dispatch(argc, argv); }
