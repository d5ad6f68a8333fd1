// pybind11 surface, populated as the core modules land
#include <pybind11/pybind11.h>
PYBIND11_MODULE(_hsie, m) { m.doc() = "hsie bindings"; }
