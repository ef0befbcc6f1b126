#pragma once

#include <fervor/fvgeom.hpp>
#include <fervor/multidomain.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fervor {

/*!
 * \brief Hierarchical key-value configuration: Group.Key -> value.
 *
 * Read from INI-style text ([Group] or [A.B] headers, Key = Value lines,
 * # comments) and command line flags -Group.Key value, which take
 * precedence over file values. Keys never read are reported by unusedKeys().
 */
class ParameterTree
{
public:
    ParameterTree() = default;

    //! parse INI text; `source` names the input in error messages
    void readString(const std::string& text, const std::string& source = "<string>");
    void readFile(const std::filesystem::path& file);
    /*!
     * \brief Arguments after the scenario name: optional parameter file, then -Group.Key value pairs.
     *
     * Without a positional file, `defaultFile` is read if it exists.
     */
    void parseArguments(std::span<const std::string> args, const std::string& defaultFile = "params.input");

    void set(const std::string& key, const std::string& value);
    bool hasKey(const std::string& key) const;

    //! throws ParameterError naming the full key if missing or not convertible
    template<class T> T get(const std::string& key) const;
    template<class T> T get(const std::string& key, const T& defaultValue) const
    { return hasKey(key) ? get<T>(key) : defaultValue; }
    template<class T> std::vector<T> getVector(const std::string& key) const;
    template<class T> std::vector<T> getVector(const std::string& key, const std::vector<T>& defaultValue) const
    { return hasKey(key) ? getVector<T>(key) : defaultValue; }

    //! directory of the parameter file, for resolving relative paths
    const std::filesystem::path& baseDirectory() const { return baseDirectory_; }
    const std::map<std::string, std::string>& entries() const { return values_; }
    std::vector<std::string> unusedKeys() const;

private:
    const std::string& raw(const std::string& key) const;

    std::map<std::string, std::string> values_;
    std::set<std::string> overridden_;
    mutable std::set<std::string> used_;
    std::filesystem::path baseDirectory_ = ".";
};

template<> std::string ParameterTree::get<std::string>(const std::string& key) const;
template<> double ParameterTree::get<double>(const std::string& key) const;
template<> int ParameterTree::get<int>(const std::string& key) const;
template<> bool ParameterTree::get<bool>(const std::string& key) const;
template<> std::vector<double> ParameterTree::getVector<double>(const std::string& key) const;
template<> std::vector<int> ParameterTree::getVector<int>(const std::string& key) const;
template<> std::vector<std::string> ParameterTree::getVector<std::string>(const std::string& key) const;

// ---------------------------------------------------------------------------
// output

struct VtkField
{
    std::string name;
    std::vector<double> values;
};

/*!
 * \brief Legacy VTK 3.0 ASCII unstructured grid.
 *
 * Fields are per dof: cell data for tpfa, point data for box. Segment
 * networks are written as line cells.
 */
void writeVtk(const std::filesystem::path& file, const GridGeometry& gg, const std::vector<VtkField>& fields);
//! intersections as vertices / lines with the segment and first target index as cell data
void writeGlueVtk(const std::filesystem::path& file, const Glue& glue);

//! per-dof scalar fields of one equation of a flat solution vector
std::vector<double> extractEquation(const Vector& u, int numEq, int eq);

class CsvWriter
{
public:
    CsvWriter(const std::filesystem::path& file, std::vector<std::string> columns);
    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }

private:
    std::ofstream out_;
    std::size_t numColumns_;
};

/*!
 * \brief Numbered VTK files <dir>/<name>_<step>.vtk, one per write.
 */
class OutputSeries
{
public:
    OutputSeries(std::filesystem::path directory, std::string name, bool enabled = true);

    bool enabled() const { return enabled_; }
    int step() const { return step_; }
    const std::filesystem::path& directory() const { return directory_; }
    const std::string& name() const { return name_; }
    std::filesystem::path file(const std::string& suffix) const { return directory_/(name_ + suffix); }

    //! write one file for the domain and advance the counter; returns the path ("" when disabled)
    std::filesystem::path write(const GridGeometry& gg, const std::vector<VtkField>& fields,
                                const std::string& domainSuffix = "");
    void advance() { ++step_; }

private:
    std::filesystem::path directory_;
    std::string name_;
    bool enabled_;
    int step_ = 0;
};

} // namespace fervor
