#include <fervor/app.hpp>

#include <algorithm>
#include <charconv>
#include <sstream>

namespace fervor {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool validKey(const std::string& key)
{
    if (key.empty() || key.front() == '.' || key.back() == '.')
        return false;
    return std::all_of(key.begin(), key.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    });
}

std::vector<std::string> tokens(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> t;
    for (std::string w; in >> w;)
        t.push_back(w);
    return t;
}

template<class T>
bool parseNumber(const std::string& s, T& value)
{
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

} // end anonymous namespace

void ParameterTree::readString(const std::string& text, const std::string& source)
{
    std::istringstream in(text);
    std::string line, group;
    int lineNumber = 0;
    while (std::getline(in, line))
    {
        ++lineNumber;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;

        const auto where = [&] { return source + ":" + std::to_string(lineNumber) + ": "; };
        if (line.front() == '[')
        {
            if (line.back() != ']')
                throw ParseError(where() + "malformed group header '" + line + "'");
            group = trim(line.substr(1, line.size() - 2));
            if (!group.empty() && !validKey(group))
                throw ParseError(where() + "invalid group name '" + group + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(where() + "expected 'Key = Value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (!validKey(key))
            throw ParseError(where() + "invalid key '" + key + "'");
        const std::string full = group.empty() ? key : group + "." + key;
        // command line values win regardless of reading order
        if (!overridden_.count(full))
            values_[full] = trim(line.substr(eq + 1));
    }
}

void ParameterTree::readFile(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw ParameterError("cannot open parameter file '" + file.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    baseDirectory_ = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    readString(text.str(), file.string());
}

void ParameterTree::parseArguments(std::span<const std::string> args, const std::string& defaultFile)
{
    std::optional<std::string> file;
    std::size_t i = 0;
    if (i < args.size() && (args[i].empty() || args[i].front() != '-'))
        file = args[i++];
    for (; i < args.size(); i += 2)
    {
        const std::string& flag = args[i];
        if (flag.size() < 2 || flag.front() != '-')
            throw ParameterError("unexpected argument '" + flag + "', expected -Group.Key value");
        const std::string key = flag.substr(1);
        if (!validKey(key))
            throw ParameterError("invalid parameter name '" + key + "'");
        if (i + 1 >= args.size())
            throw ParameterError("missing value for '" + flag + "'");
        set(key, args[i + 1]);
        overridden_.insert(key);
    }
    if (file)
        readFile(*file);
    else if (!defaultFile.empty() && std::filesystem::exists(defaultFile))
        readFile(defaultFile);
}

void ParameterTree::set(const std::string& key, const std::string& value)
{
    values_[key] = value;
}

bool ParameterTree::hasKey(const std::string& key) const
{
    return values_.count(key) > 0;
}

const std::string& ParameterTree::raw(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        throw ParameterError("missing parameter '" + key + "'");
    used_.insert(key);
    return it->second;
}

std::vector<std::string> ParameterTree::unusedKeys() const
{
    std::vector<std::string> unused;
    for (const auto& [key, value] : values_)
        if (!used_.count(key))
            unused.push_back(key);
    return unused;
}

template<> std::string ParameterTree::get<std::string>(const std::string& key) const
{
    return raw(key);
}

template<> double ParameterTree::get<double>(const std::string& key) const
{
    const std::string& s = raw(key);
    double v;
    if (!parseNumber(s, v))
        throw ParameterError("parameter '" + key + "': cannot convert '" + s + "' to a number");
    return v;
}

template<> int ParameterTree::get<int>(const std::string& key) const
{
    const std::string& s = raw(key);
    int v;
    if (!parseNumber(s, v))
        throw ParameterError("parameter '" + key + "': cannot convert '" + s + "' to an integer");
    return v;
}

template<> bool ParameterTree::get<bool>(const std::string& key) const
{
    std::string s = raw(key);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    throw ParameterError("parameter '" + key + "': cannot convert '" + raw(key) + "' to a boolean");
}

template<> std::vector<std::string> ParameterTree::getVector<std::string>(const std::string& key) const
{
    return tokens(raw(key));
}

template<> std::vector<double> ParameterTree::getVector<double>(const std::string& key) const
{
    std::vector<double> v;
    for (const auto& t : tokens(raw(key)))
    {
        double x;
        if (!parseNumber(t, x))
            throw ParameterError("parameter '" + key + "': cannot convert '" + t + "' to a number");
        v.push_back(x);
    }
    return v;
}

template<> std::vector<int> ParameterTree::getVector<int>(const std::string& key) const
{
    std::vector<int> v;
    for (const auto& t : tokens(raw(key)))
    {
        int x;
        if (!parseNumber(t, x))
            throw ParameterError("parameter '" + key + "': cannot convert '" + t + "' to an integer");
        v.push_back(x);
    }
    return v;
}

} // namespace fervor
