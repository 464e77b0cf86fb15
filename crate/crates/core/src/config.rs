//! Shot configuration: TOML parsing, default materialization and
//! validation.
//!
//! Paths are relative to the directory holding the config file. Pass
//! templates contain `{frame}`, which expands to the zero-padded four-digit
//! frame number. Solver settings cascade: built-in defaults, then the
//! shot-wide `[synthesis]` / `[temporal]` tables, then each layer's own
//! tables. Unknown keys are rejected at every level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::compositing::{BlendMode, GuideSelection, LayerKind, LayerSpec, Palette, Rgb};
use crate::error::{ConfigError, Error, Result};
use crate::guides::GuideKind;
use crate::synthesis::SynthesisParams;
use crate::temporal::TemporalParams;

/// Pass name for the color-ID pass.
pub const ID_PASS: &str = "id";

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRange {
    pub start: i64,
    pub end: i64,
}

impl FrameRange {
    pub fn len(&self) -> usize {
        (self.end - self.start + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExemplarSpec {
    pub touch: String,
    pub guides: BTreeMap<GuideKind, String>,
}

/// A fully validated shot with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotConfig {
    #[serde(skip)]
    pub base_dir: PathBuf,
    pub name: String,
    pub frames: FrameRange,
    pub seed: u64,
    pub output: String,
    pub passes: BTreeMap<String, String>,
    pub exemplars: BTreeMap<String, ExemplarSpec>,
    pub layers: Vec<LayerSpec>,
    pub palette: Palette,
    pub synthesis: SynthesisParams,
    pub temporal: TemporalParams,
}

impl ShotConfig {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    /// File of `pass` at `frame`, or `None` if the shot has no such pass.
    pub fn pass_path(&self, pass: &str, frame: i64) -> Option<PathBuf> {
        self.passes
            .get(pass)
            .map(|t| self.resolve(&t.replace("{frame}", &format!("{frame:04}"))))
    }

    pub fn layer(&self, name: &str) -> Result<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name).ok_or_else(|| {
            Error::InvalidParams(format!("shot `{}` has no layer `{name}`", self.name))
        })
    }

    pub fn base_layer(&self) -> &LayerSpec {
        self.layers
            .iter()
            .find(|l| l.kind == LayerKind::Base)
            .expect("validated config has a base layer")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    frames: FrameRange,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output")]
    output: String,
    passes: BTreeMap<String, String>,
    exemplars: BTreeMap<String, RawExemplar>,
    layers: Vec<RawLayer>,
    palette: RawPalette,
    #[serde(default)]
    synthesis: toml::Table,
    #[serde(default)]
    temporal: toml::Table,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExemplar {
    touch: String,
    guides: BTreeMap<GuideKind, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    name: String,
    kind: LayerKind,
    exemplar: String,
    guides: Vec<GuideSelection>,
    blend: Option<BlendMode>,
    #[serde(default = "one")]
    opacity: f32,
    #[serde(default)]
    synthesis: toml::Table,
    #[serde(default)]
    temporal: toml::Table,
}

fn one() -> f32 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPalette {
    #[serde(default = "white")]
    background: Rgb,
    colors: BTreeMap<String, Rgb>,
    #[serde(default)]
    tints: BTreeMap<String, Rgb>,
    #[serde(default)]
    layer_colors: BTreeMap<String, BTreeMap<String, Rgb>>,
}

fn white() -> Rgb {
    [1.0; 3]
}

fn first_quoted(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn classify(path: &Path, src: Option<&str>, context: &str, err: toml::de::Error) -> ConfigError {
    let message = err.message().trim().to_string();
    let path = path.to_path_buf();
    let key = first_quoted(&message);
    let qualify = |k: String| if context.is_empty() { k } else { format!("{context}.{k}") };
    if message.starts_with("unknown field") {
        return ConfigError::UnknownKey {
            path,
            key: qualify(key.unwrap_or_default()),
        };
    }
    if message.starts_with("missing field") {
        return ConfigError::MissingKey {
            path,
            key: qualify(key.unwrap_or_default()),
        };
    }
    let location = match (src, err.span()) {
        (Some(src), Some(span)) => {
            let (line, column) = line_col(src, span.start);
            format!(" at line {line}, column {column}")
        }
        _ if !context.is_empty() => format!(" in `{context}`"),
        _ => String::new(),
    };
    ConfigError::InvalidValue {
        path,
        message: format!("{message}{location}"),
    }
}

fn merge(base: &mut toml::Table, overlay: &toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

fn defaults_table<T: Default + Serialize>() -> toml::Table {
    match toml::Value::try_from(T::default()) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("parameter structs serialize to tables"),
    }
}

fn decode<T: DeserializeOwned>(path: &Path, context: &str, table: toml::Table) -> Result<T, ConfigError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| classify(path, None, context, e))
}

fn invalid(path: &Path, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_unit_rgb(path: &Path, what: &str, rgb: &Rgb) -> Result<(), ConfigError> {
    if rgb.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(ConfigError::InvalidValue {
            path: path.to_path_buf(),
            message: format!("{what} {rgb:?} outside [0, 1]"),
        })
    }
}

fn parse_ids(path: &Path, what: &str, raw: BTreeMap<String, Rgb>) -> Result<BTreeMap<u32, Rgb>, ConfigError> {
    raw.into_iter()
        .map(|(k, rgb)| {
            let id = k.parse::<u32>().map_err(|_| ConfigError::InvalidValue {
                path: path.to_path_buf(),
                message: format!("{what} key `{k}` is not a color id"),
            })?;
            check_unit_rgb(path, &format!("{what}.{k}"), &rgb)?;
            Ok((id, rgb))
        })
        .collect()
}

fn pass_name_known(name: &str) -> bool {
    name == ID_PASS
        || GuideKind::ALL
            .iter()
            .any(|k| *k != GuideKind::Temporal && k.as_str() == name)
}

/// Reads, validates and materializes a shot config.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ShotConfig> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(parse_config_str(&src, path, &base_dir)?)
}

/// Parses config text as if it were read from `path`, resolving relative
/// paths against `base_dir`.
pub fn parse_config_str(src: &str, path: &Path, base_dir: &Path) -> Result<ShotConfig, ConfigError> {
    if let Err(e) = src.parse::<toml::Table>() {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
        return Err(ConfigError::Syntax {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        });
    }
    let raw: RawConfig = toml::from_str(src).map_err(|e| classify(path, Some(src), "", e))?;

    if raw.frames.is_empty() {
        return Err(invalid(
            path,
            format!("frame range {}..={} is empty", raw.frames.start, raw.frames.end),
        ));
    }
    for name in raw.passes.keys() {
        if !pass_name_known(name) {
            return Err(ConfigError::UnknownKey {
                path: path.to_path_buf(),
                key: format!("passes.{name}"),
            });
        }
    }
    if !raw.passes.contains_key(ID_PASS) {
        return Err(ConfigError::MissingKey {
            path: path.to_path_buf(),
            key: format!("passes.{ID_PASS}"),
        });
    }

    let mut shot_synth = toml::Table::new();
    shot_synth.insert("seed".into(), toml::Value::Integer(raw.seed as i64));
    merge(&mut shot_synth, &raw.synthesis);
    let synthesis: SynthesisParams = decode(path, "synthesis", shot_synth.clone())?;
    // Start from the serialized defaults so a partial nested table such as
    // `[temporal.advection]` keeps the advection defaults it does not name.
    let mut shot_temp = defaults_table::<TemporalParams>();
    merge(&mut shot_temp, &raw.temporal);
    let temporal: TemporalParams = decode(path, "temporal", shot_temp.clone())?;
    let check = |r: Result<()>, what: &str| {
        r.map_err(|e| ConfigError::InvalidValue {
            path: path.to_path_buf(),
            message: format!("{what}: {e}"),
        })
    };
    check(synthesis.validate(), "synthesis")?;
    check(temporal.validate(), "temporal")?;

    let mut exemplars = BTreeMap::new();
    for (name, ex) in raw.exemplars {
        for file in std::iter::once(&ex.touch).chain(ex.guides.values()) {
            let full = base_dir.join(file);
            if !full.is_file() {
                return Err(ConfigError::UnresolvablePath {
                    path: path.to_path_buf(),
                    referenced: full,
                });
            }
        }
        if ex.guides.contains_key(&GuideKind::Temporal) {
            return Err(invalid(path, format!("exemplar `{name}` cannot supply a temporal guide")));
        }
        exemplars.insert(
            name,
            ExemplarSpec {
                touch: ex.touch,
                guides: ex.guides,
            },
        );
    }

    let mut layers = Vec::with_capacity(raw.layers.len());
    for (i, l) in raw.layers.into_iter().enumerate() {
        let ctx = format!("layers[{i}]");
        if layers.iter().any(|x: &LayerSpec| x.name == l.name) {
            return Err(invalid(path, format!("duplicate layer name `{}`", l.name)));
        }
        let ex = exemplars
            .get(&l.exemplar)
            .ok_or_else(|| invalid(path, format!("layer `{}` references unknown exemplar `{}`", l.name, l.exemplar)))?;
        if l.guides.is_empty() {
            return Err(invalid(path, format!("layer `{}` selects no guides", l.name)));
        }
        for g in &l.guides {
            if g.kind == GuideKind::Temporal {
                return Err(invalid(
                    path,
                    format!("layer `{}`: the temporal guide is added automatically", l.name),
                ));
            }
            if !(g.weight >= 0.0 && g.weight.is_finite()) {
                return Err(ConfigError::InvalidValue {
                    path: path.to_path_buf(),
                    message: format!("layer `{}` weight {} for {}", l.name, g.weight, g.kind),
                });
            }
            if !raw.passes.contains_key(g.kind.as_str()) {
                return Err(ConfigError::MissingKey {
                    path: path.to_path_buf(),
                    key: format!("passes.{}", g.kind),
                });
            }
            if !ex.guides.contains_key(&g.kind) {
                return Err(ConfigError::MissingKey {
                    path: path.to_path_buf(),
                    key: format!("exemplars.{}.guides.{}", l.exemplar, g.kind),
                });
            }
        }
        if !(0.0..=1.0).contains(&l.opacity) {
            return Err(ConfigError::InvalidValue {
                path: path.to_path_buf(),
                message: format!("layer `{}` opacity {} outside [0, 1]", l.name, l.opacity),
            });
        }
        let mut synth = shot_synth.clone();
        merge(&mut synth, &l.synthesis);
        let layer_synth: SynthesisParams = decode(path, &format!("{ctx}.synthesis"), synth)?;
        let mut temp = shot_temp.clone();
        merge(&mut temp, &l.temporal);
        let layer_temp: TemporalParams = decode(path, &format!("{ctx}.temporal"), temp)?;
        check(layer_synth.validate(), &format!("layer `{}` synthesis", l.name))?;
        check(layer_temp.validate(), &format!("layer `{}` temporal", l.name))?;
        if layer_temp.temporal_weight > 0.0
            && raw.frames.len() > 1
            && !raw.passes.contains_key(GuideKind::WorldPosition.as_str())
        {
            return Err(ConfigError::MissingKey {
                path: path.to_path_buf(),
                key: "passes.world_position".into(),
            });
        }
        layers.push(LayerSpec {
            name: l.name,
            kind: l.kind,
            exemplar: l.exemplar,
            guides: l.guides,
            synthesis: layer_synth,
            temporal: layer_temp,
            blend: l.blend.unwrap_or_else(|| l.kind.default_blend()),
            opacity: l.opacity,
        });
    }
    let bases = layers.iter().filter(|l| l.kind == LayerKind::Base).count();
    if bases != 1 {
        return Err(invalid(path, format!("expected exactly one base layer, found {bases}")));
    }

    for template in raw.passes.values() {
        if !template.contains("{frame}") && raw.frames.len() > 1 {
            return Err(ConfigError::InvalidValue {
                path: path.to_path_buf(),
                message: format!("pass template `{template}` has no {{frame}} placeholder"),
            });
        }
        let dir = base_dir.join(template);
        let dir = dir.parent().unwrap_or(base_dir);
        if !dir.is_dir() {
            return Err(ConfigError::UnresolvablePath {
                path: path.to_path_buf(),
                referenced: dir.to_path_buf(),
            });
        }
    }

    check_unit_rgb(path, "palette.background", &raw.palette.background)?;
    let colors = parse_ids(path, "palette.colors", raw.palette.colors)?;
    for (name, rgb) in &raw.palette.tints {
        check_unit_rgb(path, &format!("palette.tints.{name}"), rgb)?;
    }
    let mut layer_colors = BTreeMap::new();
    for (name, map) in raw.palette.layer_colors {
        if !layers.iter().any(|l| l.name == name) {
            return Err(invalid(path, format!("palette.layer_colors names unknown layer `{name}`")));
        }
        let parsed = parse_ids(path, &format!("palette.layer_colors.{name}"), map)?;
        layer_colors.insert(name, parsed);
    }

    Ok(ShotConfig {
        base_dir: base_dir.to_path_buf(),
        name: raw.name,
        frames: raw.frames,
        seed: raw.seed,
        output: raw.output,
        passes: raw.passes,
        exemplars,
        layers,
        palette: Palette {
            background: raw.palette.background,
            colors,
            tints: raw.palette.tints,
            layer_colors,
        },
        synthesis,
        temporal,
    })
}
