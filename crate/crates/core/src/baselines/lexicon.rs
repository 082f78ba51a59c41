use std::collections::HashSet;
use std::path::Path;

use crate::{Error, Result};

const STOPWORDS: &str = "a about above after again against all am an and any are as at be because been before \
being below between both but by can could did do does doing down during each few for from further had has \
have having he her here hers herself him himself his how i if in into is it its itself just me more most my \
myself no nor not now of off on once only or other our ours ourselves out over own same she should so some \
such than that the their theirs them themselves then there these they this those through to too under until \
up very was we were what when where which while who whom why will with would you your yours yourself yourselves";

/// Common words treated as familiar by the difficulty-based index. A short
/// core list; a full list can be loaded from a file.
const EASY_WORDS: &str = "a able about above across act add afraid after afternoon again against age ago air \
all almost alone along already also always am among an and angry animal another answer any anyone anything \
apple are arm around as ask at away baby back bad bag ball bank be bear beat beautiful because bed been before \
began begin behind being believe bell belong below beside best better between big bird birthday black blue \
boat body book born both bottom box boy bread break bright bring brother brought brown build busy but buy by \
call came can car care careful carry cat catch chair change child children city class clean clear close cold \
color come could country cow cry cup cut dance dark day dear did die different dinner do does dog done door \
down draw dream dress drink drive drop dry during each ear early earth eat egg eight end enough even evening \
ever every everyone everything eye face fall family far farm fast father feel feet few field find fine fire \
first fish five floor flower fly follow food foot for forest forget found four free friend from front fruit \
full fun game garden gave get girl give glad go going gold gone good got grass great green grow had hair half \
hand happy hard has hat have he head hear heard heart help her here high hill him his hold home hope horse hot \
house how hundred hurt i idea if in inside into is it its job jump just keep kept kind king knew know lady \
land large last late laugh learn leave left leg let letter light like line little live long look lost lot \
loud love low made make man many may me mean men might milk mind money morning most mother move much must my \
name near need never new next nice night no noise none not nothing now number of off often old on once one \
only open or other our out over own page paper park part pay people pick picture piece place plant play please \
point poor pretty pull put question quick quiet rain ran read ready real red remember rest ride right river \
road rock room round run sad said same sat saw say school sea see seem seen sell send set seven she ship shoe \
short should show side simple sing sister sit six sky sleep small snow so some something sometimes song soon \
sound speak stand start stay step still stop story street strong such summer sun sure swim table take talk \
tall teacher tell ten than thank that the their them then there these they thing think this those thought \
three through time to today together told too took top town tree true try turn two under until up upon us use \
very visit wait walk want warm was wash watch water way we wear weather week well went were what when where \
which while white who whole why will wind window winter wish with without woman wonder wood word work world \
would write wrong year yes yet you young your";

/// A set of lower-case words, built in or read one per line from a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    words: HashSet<String>,
}

impl WordList {
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        WordList {
            words: words.into_iter().map(str::to_lowercase).collect(),
        }
    }

    pub fn stopwords() -> Self {
        Self::from_words(STOPWORDS.split_whitespace())
    }

    pub fn easy_words() -> Self {
        Self::from_words(EASY_WORDS.split_whitespace())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(
            text.lines().map(str::trim).filter(|l| !l.is_empty()),
        ))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        let s = WordList::stopwords();
        assert!(s.contains("The") && s.contains("and") && !s.contains("cat"));
        let e = WordList::easy_words();
        assert!(e.contains("cat") && !e.contains("photosynthesis"));
    }

    #[test]
    fn from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.txt");
        std::fs::write(&p, "Alpha\n\n beta \n").unwrap();
        let w = WordList::load(&p).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.contains("alpha") && w.contains("BETA"));
    }
}
