#include <fervor/mesh.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fervor {

namespace {

struct RawElement
{
    int type;
    int physical;
    std::vector<long> nodes;
};

std::string trimmed(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int nodesPerElement(int type)
{
    switch (type)
    {
        case 1: return 2;
        case 2: return 3;
        case 3: return 4;
        case 15: return 1;
        default:
            throw ParseError("unsupported MSH element type " + std::to_string(type));
    }
}

class MshReader
{
public:
    explicit MshReader(std::istream& in) : in_(in) {}

    void read()
    {
        std::string line;
        while (nextLine(line))
        {
            if (line.empty())
                continue;
            if (line.front() != '$')
                throw ParseError("line " + std::to_string(lineNo_) + ": expected section header, got '" + line + "'");

            const auto section = line.substr(1);
            if (section == "MeshFormat")
                readFormat();
            else if (section == "Nodes")
                readNodes();
            else if (section == "Elements")
                readElements();
            else
                skipSection(section);
        }

        if (!haveFormat_)
            throw ParseError("missing $MeshFormat section");
        if (!haveNodes_)
            throw ParseError("missing $Nodes section");
        if (!haveElements_)
            throw ParseError("missing $Elements section");
    }

    const std::vector<Vec>& nodes() const { return nodes_; }
    const std::unordered_map<long, int>& nodeIndex() const { return nodeIndex_; }
    const std::vector<RawElement>& elements() const { return elements_; }

private:
    bool nextLine(std::string& line)
    {
        if (!std::getline(in_, line))
            return false;
        ++lineNo_;
        line = trimmed(line);
        return true;
    }

    std::string requireLine(const std::string& section)
    {
        std::string line;
        if (!nextLine(line))
            throw ParseError("unexpected end of file in section $" + section);
        return line;
    }

    void expectEnd(const std::string& section)
    {
        const auto line = requireLine(section);
        if (line != "$End" + section)
            throw ParseError("line " + std::to_string(lineNo_) + ": expected $End" + section + ", got '" + line + "'");
    }

    void readFormat()
    {
        std::istringstream header(requireLine("MeshFormat"));
        std::string version;
        int fileType = -1, dataSize = 0;
        if (!(header >> version >> fileType >> dataSize))
            throw ParseError("line " + std::to_string(lineNo_) + ": malformed $MeshFormat header");
        if (fileType != 0)
            throw ParseError("binary MSH files are not supported");
        if (version != "2.2")
            throw ParseError("unsupported MSH version " + version + " (only 2.2 ASCII)");
        expectEnd("MeshFormat");
        haveFormat_ = true;
    }

    void readNodes()
    {
        const long count = readCount("Nodes");
        nodes_.reserve(count);
        for (long i = 0; i < count; ++i)
        {
            std::istringstream row(requireLine("Nodes"));
            long id;
            double x, y, z;
            if (!(row >> id >> x >> y >> z))
                throw ParseError("line " + std::to_string(lineNo_) + ": malformed node");
            if (!nodeIndex_.emplace(id, static_cast<int>(nodes_.size())).second)
                throw ParseError("line " + std::to_string(lineNo_) + ": duplicate node id " + std::to_string(id));
            nodes_.emplace_back(x, y, z);
        }
        expectEnd("Nodes");
        haveNodes_ = true;
    }

    void readElements()
    {
        const long count = readCount("Elements");
        for (long i = 0; i < count; ++i)
        {
            std::istringstream row(requireLine("Elements"));
            long id;
            int type, numTags;
            if (!(row >> id >> type >> numTags) || numTags < 0)
                throw ParseError("line " + std::to_string(lineNo_) + ": malformed element");
            std::vector<int> tags(numTags);
            for (auto& t : tags)
                if (!(row >> t))
                    throw ParseError("line " + std::to_string(lineNo_) + ": malformed element tags");
            RawElement element{type, tags.empty() ? 0 : tags.front(), {}};
            element.nodes.resize(nodesPerElement(type));
            for (auto& n : element.nodes)
                if (!(row >> n))
                    throw ParseError("line " + std::to_string(lineNo_) + ": missing element nodes");
            if (type != 15)
                elements_.push_back(std::move(element));
        }
        expectEnd("Elements");
        haveElements_ = true;
    }

    long readCount(const std::string& section)
    {
        std::istringstream row(requireLine(section));
        long count = -1;
        if (!(row >> count) || count < 0)
            throw ParseError("line " + std::to_string(lineNo_) + ": malformed entity count in $" + section);
        return count;
    }

    void skipSection(const std::string& section)
    {
        std::string line;
        while (nextLine(line))
            if (line == "$End" + section)
                return;
        throw ParseError("unterminated section $" + section);
    }

    std::istream& in_;
    int lineNo_ = 0;
    bool haveFormat_ = false, haveNodes_ = false, haveElements_ = false;
    std::vector<Vec> nodes_;
    std::unordered_map<long, int> nodeIndex_;
    std::vector<RawElement> elements_;
};

} // end anonymous namespace

MshData readMsh(std::istream& in)
{
    MshReader reader(in);
    reader.read();

    const auto& nodeIndex = reader.nodeIndex();
    const auto toNode = [&](long id) {
        const auto it = nodeIndex.find(id);
        if (it == nodeIndex.end())
            throw ParseError("element references undefined node " + std::to_string(id));
        return it->second;
    };

    // bulk vertices: nodes used by surface elements, in file order
    std::vector<char> usedByBulk(reader.nodes().size(), 0), usedByLines(reader.nodes().size(), 0);
    for (const auto& el : reader.elements())
        for (long n : el.nodes)
            (el.type == 1 ? usedByLines : usedByBulk)[toNode(n)] = 1;

    if (std::find(usedByBulk.begin(), usedByBulk.end(), 1) == usedByBulk.end())
        throw ParseError("no triangle or quadrilateral elements found");

    std::vector<int> bulkIndex(reader.nodes().size(), -1);
    std::vector<Vec> bulkVertices;
    for (std::size_t n = 0; n < reader.nodes().size(); ++n)
        if (usedByBulk[n])
        {
            bulkIndex[n] = static_cast<int>(bulkVertices.size());
            bulkVertices.push_back(reader.nodes()[n]);
        }

    std::vector<std::vector<int>> bulkElements;
    std::vector<int> bulkMarkers;
    std::vector<const RawElement*> lines;
    for (const auto& el : reader.elements())
    {
        if (el.type == 1)
        {
            lines.push_back(&el);
            continue;
        }
        std::vector<int> corners;
        for (long n : el.nodes)
            corners.push_back(bulkIndex[toNode(n)]);
        bulkElements.push_back(std::move(corners));
        bulkMarkers.push_back(el.physical);
    }

    // topology without markers first, to find out which lines are on the boundary
    Mesh topology(2, 2, bulkVertices, bulkElements, bulkMarkers);

    std::map<std::vector<int>, int> boundaryLineMarkers;
    std::vector<const RawElement*> networkLines;
    std::vector<int> networkFacet;
    for (const auto* line : lines)
    {
        const int a = bulkIndex[toNode(line->nodes[0])];
        const int b = bulkIndex[toNode(line->nodes[1])];
        std::optional<int> facet;
        if (a >= 0 && b >= 0)
        {
            const std::array<int, 2> fv{a, b};
            facet = topology.findFacet(fv);
        }
        if (facet && topology.facet(*facet).boundary())
            boundaryLineMarkers[{std::min(a, b), std::max(a, b)}] = line->physical;
        else
        {
            networkLines.push_back(line);
            networkFacet.push_back(facet.value_or(-1));
        }
    }

    MshData data;
    data.bulk = Mesh(2, 2, std::move(bulkVertices), std::move(bulkElements), std::move(bulkMarkers),
                     [&](const Vec&, std::span<const int> fv) {
                         const auto it = boundaryLineMarkers.find({std::min(fv[0], fv[1]), std::max(fv[0], fv[1])});
                         return it == boundaryLineMarkers.end() ? 0 : it->second;
                     });

    if (networkLines.empty())
        return data;

    std::vector<int> networkIndex(reader.nodes().size(), -1);
    std::vector<Vec> points;
    for (std::size_t n = 0; n < reader.nodes().size(); ++n)
    {
        const bool used = std::any_of(networkLines.begin(), networkLines.end(), [&](const RawElement* l) {
            return toNode(l->nodes[0]) == static_cast<int>(n) || toNode(l->nodes[1]) == static_cast<int>(n);
        });
        if (!used)
            continue;
        networkIndex[n] = static_cast<int>(points.size());
        data.networkToBulkVertex.push_back(bulkIndex[n]);
        points.push_back(reader.nodes()[n]);
    }

    const bool planar = std::all_of(points.begin(), points.end(), [](const Vec& p) { return p.z() == 0.0; });
    std::vector<std::array<int, 2>> segments;
    std::vector<int> markers;
    for (const auto* line : networkLines)
    {
        segments.push_back({networkIndex[toNode(line->nodes[0])], networkIndex[toNode(line->nodes[1])]});
        markers.push_back(line->physical);
    }

    data.network = buildSegmentNetwork(std::move(points), segments, std::vector<double>(segments.size(), 1.0),
                                       planar ? 2 : 3, std::move(markers));
    data.networkToBulkFacet = std::move(networkFacet);
    return data;
}

MshData readMsh(const std::string& fileName)
{
    std::ifstream in(fileName);
    if (!in)
        throw ParseError("cannot open mesh file " + fileName);
    return readMsh(in);
}

void writeMsh(std::ostream& out, const Mesh& bulk, const SegmentNetwork* network,
              std::span<const int> networkToBulkVertex)
{
    out.precision(17);
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";

    // network vertices without a bulk counterpart get appended after the bulk vertices
    std::vector<int> networkNode;
    std::vector<Vec> extra;
    if (network)
    {
        for (int v = 0; v < network->mesh.numVertices(); ++v)
        {
            const int b = v < static_cast<int>(networkToBulkVertex.size()) ? networkToBulkVertex[v] : -1;
            if (b >= 0)
                networkNode.push_back(b);
            else
            {
                networkNode.push_back(bulk.numVertices() + static_cast<int>(extra.size()));
                extra.push_back(network->mesh.vertex(v));
            }
        }
    }

    out << "$Nodes\n" << bulk.numVertices() + extra.size() << "\n";
    long id = 1;
    for (const auto& x : bulk.vertices())
        out << id++ << " " << x.x() << " " << x.y() << " " << x.z() << "\n";
    for (const auto& x : extra)
        out << id++ << " " << x.x() << " " << x.y() << " " << x.z() << "\n";
    out << "$EndNodes\n";

    std::vector<std::string> rows;
    const auto addRow = [&](int type, int tag, const auto& nodes) {
        std::ostringstream row;
        row << type << " 2 " << tag << " " << tag;
        for (int n : nodes)
            row << " " << n + 1;
        rows.push_back(row.str());
    };

    for (int f = 0; f < bulk.numFacets(); ++f)
        if (bulk.facet(f).boundary() && bulk.facet(f).marker != 0)
            addRow(1, bulk.facet(f).marker, bulk.facet(f).vertices);
    if (network)
        for (int s = 0; s < network->numSegments(); ++s)
        {
            const auto seg = network->mesh.element(s);
            addRow(1, network->mesh.elementMarker(s), std::array<int, 2>{networkNode[seg[0]], networkNode[seg[1]]});
        }
    for (int e = 0; e < bulk.numElements(); ++e)
        addRow(bulk.element(e).size() == 3 ? 2 : 3, bulk.elementMarker(e), bulk.element(e));

    out << "$Elements\n" << rows.size() << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        out << i + 1 << " " << rows[i] << "\n";
    out << "$EndElements\n";
}

} // namespace fervor
