#include <benchmark/benchmark.h>
int main(int argc, char** argv) { benchmark::Initialize(&argc, &argv[0] ? argv : argv); benchmark::RunSpecifiedBenchmarks(); return 0; }
