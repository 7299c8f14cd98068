// Writes the bundled demo dataset: a capture, flow labels, two alert logs
// and a matching configuration.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fnroot/synthetic.hpp"

namespace fs = std::filesystem;
using namespace fnroot;

int main(int argc, char** argv) {
    CLI::App app{"Generate the demo dataset", "fnroot-synth"};
    std::string dir;
    bool nanosecond = false;
    app.add_option("outdir", dir, "Output directory")->required();
    app.add_flag("--nanosecond", nanosecond, "Write a nanosecond-precision capture");
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(dir);
    auto data = synthetic::demo_dataset();
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        out << content;
        if (!out) {
            std::cerr << "cannot write " << name << "\n";
            std::exit(2);
        }
    };

    CaptureMetadata meta;
    if (nanosecond) meta.precision = TimestampPrecision::nanosecond;
    auto capture = data.capture_bytes(meta);
    write("capture.pcap", std::string(capture.begin(), capture.end()));
    write("labels.csv", data.label_csv());
    write("snort.fast", data.fast_log(synthetic::kSnort));
    write("suricata.eve", data.eve_log(synthetic::kSuricata));
    write("config.json", data.config(synthetic::kCaseYear).dump(2) + "\n");
    std::cout << "wrote " << data.packets().size() << " packets, " << data.flows().size() << " labelled flows, "
              << data.alerts(synthetic::kSnort).size() << " snort and " << data.alerts(synthetic::kSuricata).size()
              << " suricata alerts to " << dir << "\n";
    return 0;
}
