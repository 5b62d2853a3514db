from .attributes import (
    AttributeVector,
    GeoMap,
    attribute_bins,
    alpha_to_geo,
    attrs_to_alpha,
    default_geo_map,
    geo_clauses,
    parse_prompt,
    sample_attributes,
    synth_prompt,
)
from .shapemodel import FaceMesh, ShapeModel, build_mesh, default_shape_model, fit_alpha
from .raster import Camera, RenderResult, SHLighting, render
from .texture import default_template, synth_texture
from .records import DatasetRecord, GenerationConfig, RelitView, corrupt, make_record

__all__ = [
    "AttributeVector",
    "GeoMap",
    "alpha_to_geo",
    "attrs_to_alpha",
    "default_geo_map",
    "geo_clauses",
    "parse_prompt",
    "attribute_bins",
    "sample_attributes",
    "synth_prompt",
    "FaceMesh",
    "ShapeModel",
    "build_mesh",
    "default_shape_model",
    "fit_alpha",
    "Camera",
    "RenderResult",
    "SHLighting",
    "render",
    "default_template",
    "synth_texture",
    "DatasetRecord",
    "RelitView",
    "GenerationConfig",
    "corrupt",
    "make_record",
]
