#include "savfi/cnn/model_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "savfi/tensorfile.hpp"

namespace savfi::cnn {
namespace {

std::vector<std::string> tensor_names(const NetSpec& spec) {
  std::vector<std::string> names;
  for (int i = 0; i < spec.stages(); ++i) {
    names.push_back("enc" + std::to_string(i) + ".w");
    names.push_back("enc" + std::to_string(i) + ".b");
  }
  for (int j = 0; j < spec.stages(); ++j) {
    names.push_back("dec" + std::to_string(j) + ".w");
    names.push_back("dec" + std::to_string(j) + ".b");
  }
  names.push_back("head.w");
  names.push_back("head.b");
  return names;
}

std::string join(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i != 0 ? "," : "") << v[static_cast<std::size_t>(i)];
  }
  return os.str();
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

void save_model(const std::filesystem::path& dir,
                const ModelParams<float>& params) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.txt", std::ios::trunc);
  if (!index) {
    throw DataError("cannot open " + (dir / "index.txt").string());
  }
  index << "input_channels=" << params.spec.input_channels << "\n";
  index << "output_channels=" << params.spec.output_channels << "\n";
  index << "encoder_channels=" << join(params.spec.encoder_channels) << "\n";
  index << "decoder_channels=" << join(params.spec.decoder_channels) << "\n";

  const std::vector<std::string> names = tensor_names(params.spec);
  const auto tensors = params.tensors();
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string file = names[i];
    for (char& c : file) {
      if (c == '.') {
        c = '_';
      }
    }
    file += ".vfit";
    std::vector<std::uint64_t> dims;
    for (int d : tensors[i]->dims()) {
      dims.push_back(static_cast<std::uint64_t>(d));
    }
    write_tensor(dir / file, make_tensor(dims, tensors[i]->values()));
    index << "tensor=" << names[i] << " file=" << file << "\n";
  }
}

ModelParams<float> load_model(const std::filesystem::path& dir) {
  std::ifstream index(dir / "index.txt");
  if (!index) {
    throw DataError("missing model index: " + (dir / "index.txt").string());
  }
  NetSpec spec;
  std::vector<std::pair<std::string, std::string>> files;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (line.rfind("input_channels=", 0) == 0) {
      spec.input_channels = std::stoi(line.substr(15));
    } else if (line.rfind("output_channels=", 0) == 0) {
      spec.output_channels = std::stoi(line.substr(16));
    } else if (line.rfind("encoder_channels=", 0) == 0) {
      spec.encoder_channels = split_ints(line.substr(17));
    } else if (line.rfind("decoder_channels=", 0) == 0) {
      spec.decoder_channels = split_ints(line.substr(17));
    } else if (line.rfind("tensor=", 0) == 0) {
      const auto space = line.find(" file=");
      if (space == std::string::npos) {
        throw DataError("malformed model index line: " + line);
      }
      files.emplace_back(line.substr(7, space - 7), line.substr(space + 6));
    }
  }
  spec.validate();

  ModelParams<float> params = ModelParams<float>::he_init(spec, 0);
  const std::vector<std::string> names = tensor_names(spec);
  auto tensors = params.tensors();
  if (files.size() != names.size()) {
    throw DataError("model index lists " + std::to_string(files.size()) +
                    " tensors, expected " + std::to_string(names.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (files[i].first != names[i]) {
      throw DataError("unexpected tensor name '" + files[i].first +
                      "' in model index");
    }
    const TensorData t = read_tensor(dir / files[i].second);
    if (t.dtype() != Dtype::F32 ||
        t.element_count() != tensors[i]->size()) {
      throw DataError("tensor shape mismatch for " + names[i]);
    }
    std::copy(t.f32().begin(), t.f32().end(), tensors[i]->data());
  }
  return params;
}

}  // namespace savfi::cnn
