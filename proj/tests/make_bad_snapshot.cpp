// Writes a snapshot on the grids of a config with one negative density entry.
// Usage: make_bad_snapshot <config> <out.bin>

#include <fstream>
#include <iostream>
#include <sstream>

#include "spray/config.hpp"
#include "spray/io.hpp"

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: make_bad_snapshot <config> <out.bin>\n";
        return 2;
    }
    std::ifstream is(argv[1]);
    std::ostringstream ss;
    ss << is.rdbuf();
    const spray::SimConfig c = spray::parse_config(ss.str());
    const spray::Setup su = spray::make_setup(c);
    spray::CoupledState s = spray::make_initial_state(c, su);
    // at xi = 0 so the speed check on load does not reject it first
    std::size_t rest = 0;
    for (std::size_t i = 0; i < su.vgrid->size(); ++i)
        if (su.vgrid->speed(i) < su.vgrid->speed(rest)) rest = i;
    s.kinetic.slice(0)[rest] = -0.25;
    spray::write_snapshot(argv[2], s);
    return 0;
}
