#pragma once

#include <map>
#include <string>

namespace ncp {

// Flat key-value configuration: "key = value" lines, [section] headers that
// prefix following keys as "section.key", '#' comments, blank lines ignored.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config(const std::string& path);

std::string config_str(const ConfigMap& cfg, const std::string& key, const std::string& fallback);
double config_num(const ConfigMap& cfg, const std::string& key, double fallback);

}  // namespace ncp
