//! Per-category annotation counts and proportions.

use alloc::vec::Vec;

use serde::Serialize;

use crate::category::Category;
use crate::model::AnnotationSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCount {
    pub category: Category,
    pub count: usize,
    /// Fraction of the total in `[0, 1]`; zero when the total is zero.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    /// One row per category in schema order, including zero rows.
    pub rows: Vec<CategoryCount>,
    pub total: usize,
    /// Set when there are no annotations and proportions are undefined.
    pub empty: bool,
}

impl CorpusStats {
    pub fn from_categories(categories: impl IntoIterator<Item = Category>) -> Self {
        let mut counts = [0usize; 9];
        for cat in categories {
            counts[cat.index()] += 1;
        }
        Self::from_counts(counts)
    }

    /// `counts` indexed by [`Category::index`].
    pub fn from_counts(counts: [usize; 9]) -> Self {
        let total: usize = counts.iter().sum();
        let rows = Category::ALL
            .iter()
            .map(|&category| {
                let count = counts[category.index()];
                let proportion = if total == 0 { 0.0 } else { count as f64 / total as f64 };
                CategoryCount {
                    category,
                    count,
                    proportion,
                }
            })
            .collect();
        CorpusStats {
            rows,
            total,
            empty: total == 0,
        }
    }

    pub fn count(&self, category: Category) -> usize {
        self.rows[category.index()].count
    }

    pub fn proportion(&self, category: Category) -> f64 {
        self.rows[category.index()].proportion
    }

    /// Proportion in percent.
    pub fn percent(&self, category: Category) -> f64 {
        self.proportion(category) * 100.0
    }
}

pub fn corpus_stats(set: &AnnotationSet) -> CorpusStats {
    CorpusStats::from_categories(set.iter().map(|s| s.category()))
}
