#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "nrde/binary_io.hpp"
#include "nrde/dataset.hpp"
#include "nrde/errors.hpp"
#include "nrde/nrde_model.hpp"
#include "nrde/training.hpp"

namespace nrde {

// Model file: "NRDECKPT" | u32 version | u64 v, w, field_width, field_layers,
// init_width, q | u32 depth | u64 step, substeps | u32 output mode |
// u64 parameter count | parameters as f64. Little-endian throughout.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_model(const std::string& file, const NrdeModel& model) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ParseError(file, 0, "cannot open checkpoint for writing");
    const NrdeConfig& c = model.config();
    io::write_bytes(out, "NRDECKPT");
    io::write_u32(out, kCheckpointVersion);
    for (std::size_t x : {c.input_channels, c.hidden, c.field_width, c.field_layers, c.init_width, c.outputs})
        io::write_u64(out, x);
    io::write_u32(out, static_cast<std::uint32_t>(c.depth));
    io::write_u64(out, c.step);
    io::write_u64(out, c.substeps);
    io::write_u32(out, c.output_mode == OutputMode::Final ? 0u : 1u);
    const std::vector<double> p = model.parameters();
    io::write_u64(out, p.size());
    for (double x : p) io::write_f64(out, x);
}

inline NrdeModel load_model(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ParseError(file, 0, "cannot open checkpoint");
    if (io::read_bytes(in, 8, file) != "NRDECKPT") throw ParseError(file, 0, "not a model checkpoint");
    if (io::read_u32(in, file) != kCheckpointVersion) throw ParseError(file, 0, "unsupported checkpoint version");
    NrdeConfig c;
    for (std::size_t* x : {&c.input_channels, &c.hidden, &c.field_width, &c.field_layers, &c.init_width, &c.outputs})
        *x = io::read_u64(in, file);
    c.depth = static_cast<int>(io::read_u32(in, file));
    c.step = io::read_u64(in, file);
    c.substeps = io::read_u64(in, file);
    c.output_mode = io::read_u32(in, file) == 0u ? OutputMode::Final : OutputMode::AllTimes;
    NrdeModel model(c);
    const std::uint64_t n = io::read_u64(in, file);
    if (n != model.num_params()) throw ParseError(file, 0, "parameter count does not match architecture");
    std::vector<double> p(n);
    for (double& x : p) x = io::read_f64(in, file);
    model.set_parameters(p);
    return model;
}

inline void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,train_loss,val_loss,lr,wall_clock_s,peak_live_values\n";
    for (const EpochRecord& e : history)
        out << e.epoch << ',' << detail::format_double(e.train_loss) << ',' << detail::format_double(e.val_loss) << ','
            << detail::format_double(e.lr) << ',' << detail::format_double(e.wall_clock_s) << ','
            << e.peak_live_values << '\n';
}

/// `key = value` lines, `#` comments and blank lines ignored. Keys keep file
/// order; later occurrences override earlier ones when applied in order.
inline std::vector<std::pair<std::string, std::string>> parse_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ParseError(file, 0, "cannot open config file");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string_view body = detail::trim(line);
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(file, line_no, "expected 'key = value'");
        const std::string key(detail::trim(body.substr(0, eq)));
        const std::string value(detail::trim(body.substr(eq + 1)));
        if (key.empty()) throw ParseError(file, line_no, "empty key");
        out.emplace_back(key, value);
    }
    return out;
}

}  // namespace nrde
