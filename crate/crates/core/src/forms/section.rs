//! Sections of the fibrations between the chart triple, and pullback of forms
//! along them. Coordinates shared by source and target map identically; only
//! genuinely fibered coordinates carry images.

use crate::symexpr::Expr;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ChartSpec, DifferentialForm, FormError};

/// A section of a fibration `target → source` over a shared base: every
/// target coordinate maps to an expression in the source coordinates.
#[derive(Debug, Clone)]
pub struct SectionMap {
    source: Arc<ChartSpec>,
    target: Arc<ChartSpec>,
    images: BTreeMap<String, Expr>,
}

impl SectionMap {
    /// Build a section. `given` supplies images for the target coordinates
    /// that are not shared with the source; shared names map identically and
    /// may be omitted (if supplied they must be the identity).
    pub fn new(
        source: Arc<ChartSpec>,
        target: Arc<ChartSpec>,
        given: BTreeMap<String, Expr>,
    ) -> Result<Self, FormError> {
        let mut images = BTreeMap::new();
        for name in target.coords() {
            if source.index_of(name).is_some() {
                if let Some(e) = given.get(name) {
                    if *e != Expr::var(name) {
                        return Err(FormError::BadImage {
                            name: name.clone(),
                            reason: "shared coordinates must map identically".into(),
                        });
                    }
                }
                images.insert(name.clone(), Expr::var(name));
            } else {
                let e = given.get(name).ok_or_else(|| FormError::MissingImage {
                    name: name.clone(),
                })?;
                for v in e.free_vars() {
                    if source.index_of(&v).is_none() {
                        return Err(FormError::BadImage {
                            name: name.clone(),
                            reason: format!("image depends on `{v}`, not a source coordinate"),
                        });
                    }
                }
                images.insert(name.clone(), e.clone());
            }
        }
        for name in given.keys() {
            if target.index_of(name).is_none() {
                return Err(FormError::UnknownCoordinate { name: name.clone() });
            }
        }
        Ok(SectionMap {
            source,
            target,
            images,
        })
    }

    pub fn source(&self) -> &Arc<ChartSpec> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ChartSpec> {
        &self.target
    }

    pub fn image(&self, name: &str) -> Option<&Expr> {
        self.images.get(name)
    }

    fn image_map(&self) -> &BTreeMap<String, Expr> {
        &self.images
    }

    /// Composition: `outer ∘ self`, a section of `outer.target → self.source`.
    /// `self: A → B`, `outer: B → C`.
    pub fn then(&self, outer: &SectionMap) -> Result<SectionMap, FormError> {
        if !self.target.same_coords(&outer.source) {
            return Err(FormError::ChartMismatch);
        }
        let mut images = BTreeMap::new();
        for (name, e) in outer.image_map() {
            images.insert(name.clone(), e.subst(self.image_map())?);
        }
        Ok(SectionMap {
            source: self.source.clone(),
            target: outer.target.clone(),
            images,
        })
    }

    /// Pullback of a form on the target chart: substitute coordinates by
    /// their images and each differential by the total differential of its
    /// image. Degree is preserved.
    pub fn pullback(&self, form: &DifferentialForm) -> Result<DifferentialForm, FormError> {
        if !form.chart().same_coords(&self.target) {
            return Err(FormError::ChartMismatch);
        }
        // dz ↦ Σ_w ∂(image z)/∂w · dw on the source chart, cached per coordinate
        let mut d_images: BTreeMap<u8, DifferentialForm> = BTreeMap::new();
        let mut out = DifferentialForm::zero(self.source.clone(), form.degree());
        for (idx, coeff) in form.terms() {
            let pulled_coeff = coeff.subst(self.image_map())?;
            if pulled_coeff.is_zero() {
                continue;
            }
            let mut acc = DifferentialForm::scalar(self.source.clone(), pulled_coeff);
            for &zi in idx {
                let d_image = d_images.entry(zi).or_insert_with(|| {
                    let name = self.target.coord_name(zi);
                    let image = &self.images[name];
                    let mut one_form = DifferentialForm::zero(self.source.clone(), 1);
                    for (w, wname) in self.source.coords().iter().enumerate() {
                        let dw = image.diff(wname);
                        if !dw.is_zero() {
                            one_form.add_term(&[w as u8], dw);
                        }
                    }
                    one_form
                });
                acc = acc.wedge(d_image)?;
            }
            out = out.add(&acc)?;
        }
        Ok(out)
    }
}
