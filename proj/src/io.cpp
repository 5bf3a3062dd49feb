#include "emf/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace emf {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    contract(f.good(), "cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    contract(f.good(), "cannot open '" + path + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    contract(f.good(), "failed writing '" + path + "'");
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    contract(!header.empty(), "write_csv: empty header");
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out.push_back(',');
        out += header[i];
    }
    out.push_back('\n');
    for (const auto& row : rows) {
        contract(row.size() == header.size(), "write_csv: row width differs from header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            out += row[i];
        }
        out.push_back('\n');
    }
    write_text_file(path, out);
}

namespace {

const char* kPalette[10] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4",
                            "#8c613c", "#dc7ec0", "#797979", "#d5bb67", "#82c6e2"};

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string g3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

} // namespace

void write_scatter_svg(const std::string& path, const Tensor& pts, const std::vector<int>& labels,
                       const std::array<double, 4>& bounds, const std::string& title,
                       const std::vector<std::string>& legend_names) {
    contract(pts.ndim() == 2 && pts.cols() == 2, "write_scatter_svg: (n, 2) points expected");
    contract(labels.empty() || labels.size() == pts.rows(), "write_scatter_svg: label count mismatch");
    const double xmin = bounds[0], xmax = bounds[1], ymin = bounds[2], ymax = bounds[3];
    contract(xmax > xmin && ymax > ymin, "write_scatter_svg: degenerate bounds");

    const double W = 640, H = 640, M = 60; // canvas and margin
    auto px = [&](double x) { return M + (x - xmin) / (xmax - xmin) * (W - 2 * M); };
    auto py = [&](double y) { return H - M - (y - ymin) / (ymax - ymin) * (H - 2 * M); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    s << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\""
      << H - 2 * M << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    if (!title.empty())
        s << "<text x=\"" << W / 2 << "\" y=\"" << M / 2
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" << title
          << "</text>\n";

    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        double fx = xmin + (xmax - xmin) * i / ticks;
        double fy = ymin + (ymax - ymin) * i / ticks;
        double tx = px(fx), ty = py(fy);
        s << "<line x1=\"" << f2(tx) << "\" y1=\"" << H - M << "\" x2=\"" << f2(tx) << "\" y2=\""
          << H - M + 5 << "\" stroke=\"#444\"/>\n";
        s << "<text x=\"" << f2(tx) << "\" y=\"" << H - M + 20
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << g3(fx)
          << "</text>\n";
        s << "<line x1=\"" << M - 5 << "\" y1=\"" << f2(ty) << "\" x2=\"" << M << "\" y2=\""
          << f2(ty) << "\" stroke=\"#444\"/>\n";
        s << "<text x=\"" << M - 8 << "\" y=\"" << f2(ty + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << g3(fy)
          << "</text>\n";
    }

    for (std::size_t i = 0; i < pts.rows(); ++i) {
        double x = pts.at(i, 0), y = pts.at(i, 1);
        if (x < xmin || x > xmax || y < ymin || y > ymax) continue;
        const char* color = labels.empty() ? kPalette[0] : kPalette[labels[i] % 10];
        s << "<circle cx=\"" << f2(px(x)) << "\" cy=\"" << f2(py(y))
          << "\" r=\"2.2\" fill=\"" << color << "\" fill-opacity=\"0.75\"/>\n";
    }

    if (!labels.empty()) {
        int max_label = 0;
        for (int l : labels) max_label = std::max(max_label, l);
        double ly = M + 14;
        for (int l = 0; l <= max_label && l < 10; ++l) {
            std::string name = l < static_cast<int>(legend_names.size()) ? legend_names[l]
                                                                         : "class " + std::to_string(l);
            s << "<circle cx=\"" << W - M - 90 << "\" cy=\"" << f2(ly)
              << "\" r=\"4\" fill=\"" << kPalette[l % 10] << "\"/>\n";
            s << "<text x=\"" << W - M - 80 << "\" y=\"" << f2(ly + 4)
              << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n";
            ly += 16;
        }
    }
    s << "</svg>\n";
    write_text_file(path, s.str());
}

} // namespace emf
