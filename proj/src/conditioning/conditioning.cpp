#include "elgen/conditioning/conditioning.hpp"

#include <sstream>

namespace elgen::conditioning {

std::string Vocabulary::serialize() const {
    std::ostringstream os;
    os << "# classes:";
    for (size_t i = 0; i < class_names_.size(); ++i)
        os << (i ? "," : " ") << class_names_[i];
    os << "\n";
    for (size_t id = 0; id < tokens_.size(); ++id) os << tokens_[id] << "\t" << id << "\n";
    return os.str();
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
    Vocabulary v;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("classes:");
            if (pos != std::string::npos) {
                std::string rest = line.substr(pos + 8);
                std::string cur;
                for (char c : rest) {
                    if (c == ',' || c == ' ') {
                        if (!cur.empty()) v.class_names_.push_back(cur);
                        cur.clear();
                    } else {
                        cur.push_back(c);
                    }
                }
                if (!cur.empty()) v.class_names_.push_back(cur);
            }
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw IoError("vocabulary: malformed line: " + line);
        const std::string token = line.substr(0, tab);
        const int id = std::stoi(line.substr(tab + 1));
        if (id != static_cast<int>(v.tokens_.size()))
            throw IoError("vocabulary: non-contiguous ids");
        const bool pseudo = token == "s*" || token.rfind("s^", 0) == 0;
        v.add(token, pseudo);
    }
    return v;
}

}  // namespace elgen::conditioning
