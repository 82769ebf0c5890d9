#include "segtrus/cli.hpp"

int main(int argc, char** argv) { return segtrus::dispatch(argc, argv); }
