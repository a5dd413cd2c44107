import yaml
import pandas as pd
import pandera.pandas as pa
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
from pandera.errors import SchemaError
from src.utils.ball_geometry import Point
from src.utils.measure_model import Atom, Measure, RadialDensity


FieldPath = Tuple[Union[str, int], ...]


class SpecParseError(ValueError):
    """
    Raised for malformed measure or scenario documents; points at the file, line and field.
    """

    def __init__(
        self,
        message: str,
        source: Optional[Path] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
    ):
        self.source = source
        self.line = line
        self.field = field
        location = str(source) if source else "<document>"
        if line is not None:
            location += f":{line}"
        prefix = f"{location}: {field}: " if field else f"{location}: "
        super().__init__(prefix + message)


def format_field(path: FieldPath) -> str:
    """
    Dotted field path, e.g. atoms[2].mass.
    """
    out = ""
    for key in path:
        out += f"[{key}]" if isinstance(key, int) else (f".{key}" if out else key)
    return out


class YamlDocument:
    """
    A parsed YAML document that keeps its node tree for line diagnostics.
    """

    def __init__(self, text: str, source: Optional[Path] = None):
        self.source = source
        try:
            self.root = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise SpecParseError(
                f"Invalid YAML : {getattr(e, 'problem', e)}",
                source,
                mark.line + 1 if mark else None,
            )
        if not isinstance(self.data, dict):
            raise SpecParseError("Top level must be a mapping", source, 1)

    @classmethod
    def from_path(cls, path: Path) -> "YamlDocument":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise SpecParseError(f"Cannot read document : {e}", Path(path))
        return cls(text, Path(path))

    def line_of(self, path: FieldPath) -> Optional[int]:
        node = self.root
        for key in path:
            if isinstance(node, yaml.MappingNode):
                match = next((v for k, v in node.value if k.value == key), None)
                if match is None:
                    break
                node = match
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
            else:
                break
        return node.start_mark.line + 1 if node is not None else None

    def error(self, message: str, path: FieldPath) -> SpecParseError:
        return SpecParseError(message, self.source, self.line_of(path), format_field(path))

    def reject_unknown(self, mapping: Dict[str, Any], allowed: Sequence[str], path: FieldPath) -> None:
        for key in mapping:
            if key not in allowed:
                raise self.error(
                    f"Unknown field '{key}'. Allowed fields : {', '.join(allowed)}", path + (key,)
                )

    def number(self, value: Any, path: FieldPath) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(f"Expected a number, got {value!r}", path)
        return float(value)

    def integer(self, value: Any, path: FieldPath) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(f"Expected an integer, got {value!r}", path)
        return value

    def mapping(self, value: Any, path: FieldPath) -> Dict[str, Any]:
        if not isinstance(value, dict):
            raise self.error("Expected a mapping", path)
        return value

    def sequence(self, value: Any, path: FieldPath) -> List[Any]:
        if value is None:
            return []
        if not isinstance(value, list):
            raise self.error("Expected a list", path)
        return value


class MeasureFileSpecs:
    """
    Specifications for measure documents: field names and validation schemas.
    """

    class Fields(Enum):
        DIMENSION = "dimension"
        ATOMS = "atoms"
        DENSITIES = "densities"

    class AtomFields(Enum):
        COORDS = "coords"
        MASS = "mass"

    class DensityFields(Enum):
        ALPHA = "alpha"
        AMPLITUDE = "amplitude"
        CUTOFF = "cutoff"

    class DensitySchema(pa.DataFrameModel):
        """
        Pandera schema for the density table.
        """

        alpha: float = pa.Field(coerce=True)
        amplitude: float = pa.Field(gt=0, coerce=True)
        cutoff: float = pa.Field(ge=0, lt=1, coerce=True)

    @staticmethod
    def atom_schema(n: int) -> pa.DataFrameSchema:
        """
        Pandera schema for the atom table: re_j/im_j coordinate columns and a mass column.
        """
        columns = {}
        for j in range(1, n + 1):
            columns[f"re_{j}"] = pa.Column(float, coerce=True)
            columns[f"im_{j}"] = pa.Column(float, coerce=True)
        columns["mass"] = pa.Column(float, pa.Check.gt(0), coerce=True)
        re_cols = [f"re_{j}" for j in range(1, n + 1)]
        im_cols = [f"im_{j}" for j in range(1, n + 1)]
        return pa.DataFrameSchema(
            columns,
            checks=pa.Check(
                lambda df: (df[re_cols] ** 2).sum(axis=1) + (df[im_cols] ** 2).sum(axis=1) < 1.0,
                error="atom must lie strictly inside the unit ball",
            ),
            strict=True,
        )


def _failure_index(e: SchemaError) -> Optional[int]:
    cases = getattr(e, "failure_cases", None)
    if isinstance(cases, pd.DataFrame) and "index" in cases and cases["index"].notna().any():
        return int(cases["index"].dropna().iloc[0])
    return None


def _atom_table(doc: YamlDocument, atoms: List[Any], n: int) -> pd.DataFrame:
    fields = MeasureFileSpecs.AtomFields
    rows = []
    for i, atom in enumerate(atoms):
        path = (MeasureFileSpecs.Fields.ATOMS.value, i)
        atom = doc.mapping(atom, path)
        doc.reject_unknown(atom, [f.value for f in fields], path)
        for f in fields:
            if f.value not in atom:
                raise doc.error(f"Missing field '{f.value}'", path)
        coords_path = path + (fields.COORDS.value,)
        coords = doc.sequence(atom[fields.COORDS.value], coords_path)
        if len(coords) != n:
            raise doc.error(f"Expected {n} [re, im] pairs, got {len(coords)}", coords_path)
        row = {}
        for j, pair in enumerate(coords, start=1):
            pair_path = coords_path + (j - 1,)
            pair = doc.sequence(pair, pair_path)
            if len(pair) != 2:
                raise doc.error("Expected a [re, im] pair", pair_path)
            row[f"re_{j}"] = doc.number(pair[0], pair_path)
            row[f"im_{j}"] = doc.number(pair[1], pair_path)
        row["mass"] = doc.number(atom[fields.MASS.value], path + (fields.MASS.value,))
        rows.append(row)
    columns = [c for j in range(1, n + 1) for c in (f"re_{j}", f"im_{j}")] + ["mass"]
    df = pd.DataFrame(rows, columns=columns)
    try:
        return MeasureFileSpecs.atom_schema(n).validate(df)
    except SchemaError as e:
        index = _failure_index(e)
        where = (MeasureFileSpecs.Fields.ATOMS.value,) + ((index,) if index is not None else ())
        raise doc.error(f"Atom validation failed : {e}", where)


def _density_table(doc: YamlDocument, densities: List[Any]) -> pd.DataFrame:
    fields = MeasureFileSpecs.DensityFields
    rows = []
    for i, density in enumerate(densities):
        path = (MeasureFileSpecs.Fields.DENSITIES.value, i)
        density = doc.mapping(density, path)
        doc.reject_unknown(density, [f.value for f in fields], path)
        if fields.ALPHA.value not in density:
            raise doc.error(f"Missing field '{fields.ALPHA.value}'", path)
        rows.append(
            {
                fields.ALPHA.value: doc.number(density[fields.ALPHA.value], path + (fields.ALPHA.value,)),
                fields.AMPLITUDE.value: doc.number(density.get(fields.AMPLITUDE.value, 1.0), path + (fields.AMPLITUDE.value,)),
                fields.CUTOFF.value: doc.number(density.get(fields.CUTOFF.value, 0.0), path + (fields.CUTOFF.value,)),
            }
        )
    df = pd.DataFrame(rows, columns=[f.value for f in fields])
    try:
        return MeasureFileSpecs.DensitySchema.validate(df)
    except SchemaError as e:
        index = _failure_index(e)
        where = (MeasureFileSpecs.Fields.DENSITIES.value,) + ((index,) if index is not None else ())
        raise doc.error(f"Density validation failed : {e}", where)


def parse_measure_document(doc: YamlDocument) -> Measure:
    """
    Builds a Measure from a measure document.
    """
    fields = MeasureFileSpecs.Fields
    data = doc.data
    doc.reject_unknown(data, [f.value for f in fields], ())
    if fields.DIMENSION.value not in data:
        raise doc.error(f"Missing field '{fields.DIMENSION.value}'", ())
    n = doc.integer(data[fields.DIMENSION.value], (fields.DIMENSION.value,))
    if n < 1:
        raise doc.error(f"Invalid dimension {n}. Must be >= 1", (fields.DIMENSION.value,))

    atoms_df = _atom_table(doc, doc.sequence(data.get(fields.ATOMS.value), (fields.ATOMS.value,)), n)
    densities_df = _density_table(doc, doc.sequence(data.get(fields.DENSITIES.value), (fields.DENSITIES.value,)))

    re_cols = [f"re_{j}" for j in range(1, n + 1)]
    im_cols = [f"im_{j}" for j in range(1, n + 1)]
    coords = atoms_df[re_cols].to_numpy() + 1j * atoms_df[im_cols].to_numpy()
    atoms = tuple(Atom(Point(c), float(m)) for c, m in zip(coords, atoms_df["mass"].to_numpy()))

    densities = []
    for i, row in enumerate(densities_df.itertuples(index=False)):
        if n + row.alpha <= -1:
            raise doc.error(
                f"alpha={row.alpha} gives an infinite convergence integral; n + alpha > -1 is required",
                (fields.DENSITIES.value, i, MeasureFileSpecs.DensityFields.ALPHA.value),
            )
        densities.append(RadialDensity(float(row.alpha), float(row.amplitude), float(row.cutoff)))
    return Measure(n, atoms=atoms, densities=tuple(densities))


def load_measure_file(path: Path) -> Measure:
    return parse_measure_document(YamlDocument.from_path(path))


def measure_to_document(measure: Measure) -> str:
    """
    Serializes a measure in the measure-document format (full float precision).
    """
    document = {
        MeasureFileSpecs.Fields.DIMENSION.value: measure.n,
        MeasureFileSpecs.Fields.ATOMS.value: [
            {
                "coords": [[float(c.real), float(c.imag)] for c in atom.location.coords],
                "mass": float(atom.mass),
            }
            for atom in measure.atoms
        ],
        MeasureFileSpecs.Fields.DENSITIES.value: [
            {"alpha": float(d.alpha), "amplitude": float(d.amplitude), "cutoff": float(d.inner_cutoff)}
            for d in measure.densities
        ],
    }
    return yaml.safe_dump(document, sort_keys=False)
