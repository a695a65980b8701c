use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use super::recipes::{Alternate, Differentiate, ElementwiseAdd, Patch, Segmentize, SmallDictFit};
use super::{CodecError, CodecRef};

/// Codecs by scheme id. Composite ids such as `patch(constant)` or
/// `alternate(constant,run.rle)` resolve to recipe codecs over the named inner schemes.
#[derive(Default)]
pub struct Registry {
    codecs: BTreeMap<String, CodecRef>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.codecs.keys()).finish()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every builtin representation and compression scheme.
    pub fn with_builtins() -> Self {
        let mut r = Registry::empty();
        for c in crate::repr::schemes().into_iter().chain(crate::compress::schemes()) {
            r.register(c).expect("builtin ids are distinct");
        }
        r
    }

    pub fn builtin() -> &'static Registry {
        static REGISTRY: OnceLock<Registry> = OnceLock::new();
        REGISTRY.get_or_init(Registry::with_builtins)
    }

    pub fn register(&mut self, codec: CodecRef) -> Result<(), CodecError> {
        let id = codec.id();
        if self.codecs.contains_key(&id) || id.contains('(') {
            return Err(CodecError::DuplicateId(id));
        }
        self.codecs.insert(id, codec);
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.codecs.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.codecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codecs.is_empty()
    }

    pub fn resolve(&self, id: &str) -> Result<CodecRef, CodecError> {
        let id = id.trim();
        if let Some(c) = self.codecs.get(id) {
            return Ok(c.clone());
        }
        let Some((name, args)) = parse_recipe(id) else {
            return Err(CodecError::UnknownScheme(id.to_string()));
        };
        let inner = args.iter().map(|a| self.resolve(a)).collect::<Result<Vec<_>, _>>()?;
        let one = || -> Result<CodecRef, CodecError> {
            match inner.as_slice() {
                [c] => Ok(c.clone()),
                _ => Err(CodecError::Incompatible(format!("{name} takes one inner scheme"))),
            }
        };
        let codec: CodecRef = match name {
            "patch" => Arc::new(Patch::new(one()?)),
            "segmentize_uniform" => Arc::new(Segmentize::uniform(inner)?),
            "segmentize_variable" => Arc::new(Segmentize::variable(one()?)),
            "alternate" => Arc::new(Alternate::new(inner)?),
            "elementwise_add" => match inner.as_slice() {
                [a, b] => Arc::new(ElementwiseAdd::new(a.clone(), b.clone())),
                _ => return Err(CodecError::Incompatible("elementwise_add takes two inner schemes".into())),
            },
            "differentiate" => Arc::new(Differentiate::new(one()?)),
            "small_dict_fit" => Arc::new(SmallDictFit::new(one()?)),
            _ => return Err(CodecError::UnknownScheme(id.to_string())),
        };
        Ok(codec)
    }
}

/// Splits `name(a, b(c, d))` into `name` and its top-level arguments.
fn parse_recipe(id: &str) -> Option<(&str, Vec<&str>)> {
    let open = id.find('(')?;
    if !id.ends_with(')') {
        return None;
    }
    let name = id[..open].trim();
    let body = &id[open + 1..id.len() - 1];
    let mut args = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in body.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            ',' if depth == 0 => {
                args.push(body[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    args.push(body[start..].trim());
    if args.iter().any(|a| a.is_empty()) {
        return None;
    }
    Some((name, args))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_ids_split_at_top_level() {
        assert_eq!(parse_recipe("patch(constant)"), Some(("patch", vec!["constant"])));
        assert_eq!(
            parse_recipe("alternate(patch(constant), run.rle)"),
            Some(("alternate", vec!["patch(constant)", "run.rle"]))
        );
        assert_eq!(parse_recipe("patch(constant"), None);
        assert_eq!(parse_recipe("patch()"), None);
        assert_eq!(parse_recipe("constant"), None);
    }

    #[test]
    fn builtins_and_duplicates() {
        let r = Registry::builtin();
        assert!(r.len() >= 25);
        assert!(r.resolve("constant").is_ok());
        assert!(matches!(r.resolve("no.such"), Err(CodecError::UnknownScheme(_))));
        assert!(r.resolve("segmentize_variable(patch(constant))").is_ok());
        let mut fresh = Registry::empty();
        let c = r.resolve("constant").unwrap();
        fresh.register(c.clone()).unwrap();
        assert!(matches!(fresh.register(c), Err(CodecError::DuplicateId(_))));
    }
}
