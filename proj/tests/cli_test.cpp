// End-to-end checks of the command-line tool. Expects the binary path as
// argv[1]; exits nonzero on the first failure.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    if (!ok) {
        std::fprintf(stderr, "FAILED: %s\n", what.c_str());
        ++failures;
    }
}

int run(const std::string& command) { return std::system(command.c_str()); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        check(false, "missing file " + path.string());
        return "";
    }
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: cli_tests <path-to-kgfa-binary>\n");
        return 2;
    }
    const std::string kgfa = argv[1];
    const auto dir = std::filesystem::temp_directory_path() /
                     ("kgfa_cli_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string d = dir.string();

    // Bad invocations exit nonzero.
    check(run(kgfa + " > /dev/null 2>&1") != 0, "no subcommand should fail");
    check(run(kgfa + " run --scenario nope --seed 1 --out-dir " + d + " > /dev/null 2>&1") != 0,
          "bad scenario should fail");

    // gradcheck exits 0 and prints per-block lines.
    check(run(kgfa + " gradcheck --instances 5 > " + d + "/gc.txt 2>&1") == 0,
          "gradcheck exit code");
    const std::string gc = read_file(dir / "gc.txt");
    check(gc.find("fa.mu") != std::string::npos, "gradcheck lists fa.mu");
    check(gc.find("joint.affine_A") != std::string::npos, "gradcheck lists joint blocks");

    // synth writes the three data files plus the ground truth.
    check(run(kgfa + " synth --out-dir " + d + "/synth --n-objects 50 --m-attrs 6 --m-tied 4" +
              " --dx 2 --de 2 --extra-entities 3 --relations 2 --tuples-per-entity 3" +
              " --margin -100" +
              " --seed 12 2> /dev/null") == 0,
          "synth exit code");
    for (const char* name : {"data.csv", "triples.tsv", "attr_map.tsv", "ground_truth.json"})
        check(std::filesystem::exists(dir / "synth" / name), std::string("synth wrote ") + name);

    // run twice with one seed: byte-identical outputs.
    const std::string run_flags = " run --data " + d + "/synth/data.csv --triples " + d +
                                  "/synth/triples.tsv --map " + d + "/synth/attr_map.tsv" +
                                  " --scenario shift --seed 5 --tuple-props 0,1" +
                                  " --train-fracs 0.6 --trials 1 --dx 2 --de 2" +
                                  " --patience 10 --max-epochs 40";
    check(run(kgfa + run_flags + " --out-dir " + d + "/out1 2> /dev/null") == 0, "run 1");
    check(run(kgfa + run_flags + " --out-dir " + d + "/out2 2> /dev/null") == 0, "run 2");
    const std::string trials = read_file(dir / "out1" / "trials.tsv");
    check(!trials.empty(), "trials.tsv written");
    check(trials == read_file(dir / "out2" / "trials.tsv"), "trials.tsv reproducible");
    const std::string summary = read_file(dir / "out1" / "summary_shift_tupleprops_train0.6.txt");
    check(summary == read_file(dir / "out2" / "summary_shift_tupleprops_train0.6.txt"),
          "summary reproducible");
    check(run("grep -q failed " + d + "/out1/trials.tsv && exit 1 || exit 0") == 0,
          "no failed trials");

    // summarize regenerates identical summary tables from the trials file.
    check(run(kgfa + " summarize --trials " + d + "/out1/trials.tsv --out-dir " + d +
              "/resum 2> /dev/null") == 0,
          "summarize exit code");
    check(read_file(dir / "resum" / "summary_shift_tupleprops_train0.6.txt") == summary,
          "summarize matches run output");

    // config file + flag override: flag wins.
    {
        std::ofstream config(dir / "config.json");
        config << "{\"patience\": 10, \"max_epochs\": 40, \"n_trials\": 1,\n"
               << " \"tuple_proportions\": [1.0], \"train_fractions\": [0.6],\n"
               << " \"d_x\": 2, \"d_e\": 2,\n"
               << " \"dataset\": \"" << d << "/synth/data.csv\",\n"
               << " \"triples\": \"" << d << "/synth/triples.tsv\",\n"
               << " \"map\": \"" << d << "/synth/attr_map.tsv\"}\n";
    }
    check(run(kgfa + " run --config " + d + "/config.json --scenario shift --seed 5" +
              " --out-dir " + d + "/out3 2> /dev/null") == 0,
          "run with config file");
    check(std::filesystem::exists(dir / "out3" / "summary_shift_tupleprops_train0.6.txt"),
          "config file run wrote summary");

    if (failures == 0) {
        std::printf("cli_tests: all checks passed\n");
        return 0;
    }
    std::fprintf(stderr, "cli_tests: %d failures\n", failures);
    return 1;
}
