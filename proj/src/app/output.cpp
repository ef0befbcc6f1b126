#include <fervor/app.hpp>

#include <iomanip>
#include <sstream>

namespace fervor {

namespace {

int vtkCellType(const Mesh& mesh, int e)
{
    if (mesh.dimGrid() == 1)
        return 3; // line
    return mesh.element(e).size() == 3 ? 5 : 9; // triangle, quad
}

std::ofstream openForWriting(const std::filesystem::path& file)
{
    if (file.has_parent_path())
    {
        std::error_code ec;
        std::filesystem::create_directories(file.parent_path(), ec);
    }
    std::ofstream out(file);
    if (!out)
        throw Error("cannot write '" + file.string() + "'");
    out << std::setprecision(12);
    return out;
}

void writeScalars(std::ostream& out, const VtkField& field)
{
    out << "SCALARS " << field.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : field.values)
        out << v << "\n";
}

} // end anonymous namespace

void writeVtk(const std::filesystem::path& file, const GridGeometry& gg, const std::vector<VtkField>& fields)
{
    const auto& mesh = gg.mesh();
    for (const auto& f : fields)
        if (static_cast<int>(f.values.size()) != gg.numDofs())
            throw Error("field '" + f.name + "' has " + std::to_string(f.values.size()) + " values, expected "
                        + std::to_string(gg.numDofs()));

    auto out = openForWriting(file);
    out << "# vtk DataFile Version 3.0\nfervor output\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.numVertices() << " double\n";
    for (const auto& x : mesh.vertices())
        out << x.x() << " " << x.y() << " " << x.z() << "\n";

    std::size_t size = 0;
    for (int e = 0; e < mesh.numElements(); ++e)
        size += mesh.element(e).size() + 1;
    out << "CELLS " << mesh.numElements() << " " << size << "\n";
    for (int e = 0; e < mesh.numElements(); ++e)
    {
        out << mesh.element(e).size();
        for (int v : mesh.element(e))
            out << " " << v;
        out << "\n";
    }
    out << "CELL_TYPES " << mesh.numElements() << "\n";
    for (int e = 0; e < mesh.numElements(); ++e)
        out << vtkCellType(mesh, e) << "\n";

    if (fields.empty())
        return;
    if (gg.scheme() == Scheme::tpfa)
        out << "CELL_DATA " << mesh.numElements() << "\n";
    else
        out << "POINT_DATA " << mesh.numVertices() << "\n";
    for (const auto& f : fields)
        writeScalars(out, f);
    if (!out)
        throw Error("error while writing '" + file.string() + "'");
}

void writeGlueVtk(const std::filesystem::path& file, const Glue& glue)
{
    auto out = openForWriting(file);
    std::size_t numPoints = 0, size = 0;
    for (const auto& is : glue.intersections)
    {
        numPoints += is.corners.size();
        size += is.corners.size() + 1;
    }
    out << "# vtk DataFile Version 3.0\nfervor glue\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << numPoints << " double\n";
    for (const auto& is : glue.intersections)
        for (const auto& x : is.corners)
            out << x.x() << " " << x.y() << " " << x.z() << "\n";
    out << "CELLS " << glue.size() << " " << size << "\n";
    std::size_t next = 0;
    for (const auto& is : glue.intersections)
    {
        out << is.corners.size();
        for (std::size_t k = 0; k < is.corners.size(); ++k)
            out << " " << next++;
        out << "\n";
    }
    out << "CELL_TYPES " << glue.size() << "\n";
    for (const auto& is : glue.intersections)
        out << (is.corners.size() == 1 ? 1 : 3) << "\n";
    out << "CELL_DATA " << glue.size() << "\n";
    VtkField domain{"domainElement", {}}, target{"targetElement", {}}, neighbors{"numTargets", {}};
    for (const auto& is : glue.intersections)
    {
        domain.values.push_back(is.domainElement);
        target.values.push_back(is.targetElements.front());
        neighbors.values.push_back(is.numTargetNeighbors());
    }
    writeScalars(out, domain);
    writeScalars(out, target);
    writeScalars(out, neighbors);
}

std::vector<double> extractEquation(const Vector& u, int numEq, int eq)
{
    std::vector<double> v(u.size()/numEq);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = u[i*numEq + eq];
    return v;
}

CsvWriter::CsvWriter(const std::filesystem::path& file, std::vector<std::string> columns)
: out_(openForWriting(file)), numColumns_(columns.size())
{
    out_ << std::setprecision(17);
    for (std::size_t i = 0; i < columns.size(); ++i)
        out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
}

void CsvWriter::row(std::span<const double> values)
{
    if (values.size() != numColumns_)
        throw Error("csv row has " + std::to_string(values.size()) + " values, expected "
                    + std::to_string(numColumns_));
    for (std::size_t i = 0; i < values.size(); ++i)
        out_ << (i ? "," : "") << values[i];
    out_ << "\n";
    out_.flush();
}

OutputSeries::OutputSeries(std::filesystem::path directory, std::string name, bool enabled)
: directory_(std::move(directory)), name_(std::move(name)), enabled_(enabled)
{}

std::filesystem::path OutputSeries::write(const GridGeometry& gg, const std::vector<VtkField>& fields,
                                          const std::string& domainSuffix)
{
    if (!enabled_)
        return {};
    std::ostringstream name;
    name << name_ << domainSuffix << "_" << std::setw(5) << std::setfill('0') << step_ << ".vtk";
    const auto path = directory_/name.str();
    writeVtk(path, gg, fields);
    return path;
}

} // namespace fervor
