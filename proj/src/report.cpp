#include "srmpc/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace srmpc {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
    }
    fs::rename(tmp, target);
}

std::string trace_csv(const Model& model, const ClosedLoopTrace& trace) {
    trace.validate();
    std::ostringstream os;
    os << "k";
    for (int i = 0; i < model.n_x; ++i) os << ",z" << i;
    for (int i = 0; i < model.n_x; ++i) os << ",y" << i;
    for (int i = 0; i < model.n_u; ++i) os << ",u" << i;
    for (int i = 0; i < model.n_h; ++i) os << ",eta" << i;
    os << ",stage_cost,trace_Sigma,diverged\n";
    for (int k = 0; k < trace.steps(); ++k) {
        os << k;
        for (int i = 0; i < model.n_x; ++i) os << "," << format_double(trace.z[k](i));
        for (int i = 0; i < model.n_x; ++i) os << "," << format_double(trace.y[k](i));
        for (int i = 0; i < model.n_u; ++i) os << "," << format_double(trace.u[k](i));
        for (int i = 0; i < model.n_h; ++i) os << "," << format_double(trace.eta[k](i));
        os << "," << format_double(trace.stage_cost[k]);
        os << "," << format_double(trace.sigma[k].trace());
        os << "," << (trace.diverged && k + 1 == trace.divergence_step ? 1 : 0);
        os << "\n";
    }
    return os.str();
}

std::string plot_csv(const Model& model, const ClosedLoopTrace& trace) {
    std::ostringstream os;
    os << "k,series,value\n";
    for (size_t k = 0; k < trace.z.size(); ++k) {
        for (int i = 0; i < model.n_x; ++i) {
            os << k << ",z" << i << "," << format_double(trace.z[k](i)) << "\n";
        }
    }
    for (int k = 0; k < trace.steps(); ++k) {
        for (int i = 0; i < model.n_u; ++i) {
            os << k << ",u" << i << "," << format_double(trace.u[k](i)) << "\n";
        }
        os << k << ",trace_Sigma," << format_double(trace.sigma[k].trace()) << "\n";
    }
    return os.str();
}

}  // namespace srmpc
