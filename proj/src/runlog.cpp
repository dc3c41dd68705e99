#include <cctype>
#include <fstream>

#include "motionlab/io.hpp"

namespace motionlab {

RunLog::RunLog(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    require(f_ != nullptr, ErrCat::io, "cannot open run log: " + path);
}

RunLog::~RunLog() {
    if (f_) std::fclose(f_);
}

void RunLog::record(const nlohmann::json& rec) {
    const std::string line = rec.dump();
    const bool ok = std::fwrite(line.data(), 1, line.size(), f_) == line.size() &&
                    std::fputc('\n', f_) != EOF && std::fflush(f_) == 0;
    require(ok, ErrCat::io, "run log write failed: " + path_);
}

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace((unsigned char)s[a])) ++a;
    while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
    return s.substr(a, b - a);
}

} // namespace

std::map<std::string, std::string> read_config_file(const std::string& path,
                                                    const std::set<std::string>& allowed) {
    std::ifstream in(path);
    require(in.good(), ErrCat::io, "cannot open config file: " + path);

    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string at = path + ":" + std::to_string(lineno);
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const size_t eq = body.find('=');
        require(eq != std::string::npos, ErrCat::config, "expected key = value at " + at);
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        require(!key.empty(), ErrCat::config, "empty key at " + at);
        require(allowed.count(key) != 0, ErrCat::config, "unknown config key '" + key + "' at " + at);
        require(out.emplace(key, value).second, ErrCat::config,
                "duplicate config key '" + key + "' at " + at);
    }
    return out;
}

} // namespace motionlab
