#include "cli.hpp"

int main(int argc, char** argv)
{
    return ltpsid::cli::run(argc, argv);
}
