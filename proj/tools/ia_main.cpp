#include "ia/cli.hpp"

int main(int argc, char** argv) { return ia::dispatch(argc, argv); }
