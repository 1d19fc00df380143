use std::collections::HashMap;

use super::{DeclRole, DesignSpec, FactorDecl, InteractionPolicy, Variability, KEYWORDS};
use crate::error::{ParseError, Position};
use crate::formula::{parse_expr, StructureExpr};
use crate::lexer::{tokenize, Cursor, Token};

/// Parses a design file into a [`DesignSpec`], resolving every name.
pub fn parse_design(text: &str) -> Result<DesignSpec, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut p = Parser::default();
    p.design(&mut cur)?;
    cur.expect(Token::Eof, "end of input")?;
    p.finish()
}

#[derive(Default)]
struct Parser {
    name: String,
    treatment: Option<(Vec<FactorDecl>, Option<(StructureExpr, Position)>)>,
    unit: Option<(Vec<FactorDecl>, Option<(String, Position)>)>,
    randomize: Option<Vec<(String, String, Position)>>,
    policy: Option<(InteractionPolicy, Vec<Position>)>,
    declared: HashMap<String, (DeclRole, Position)>,
}

fn skip_separators(cur: &mut Cursor) {
    while matches!(cur.peek(), Token::Semi | Token::Comma) {
        cur.bump();
    }
}

impl Parser {
    fn design(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        cur.expect_keyword("design")?;
        let (name, _) = cur.expect_ident("a design name")?;
        self.name = name;
        cur.expect(Token::LBrace, "`{`")?;
        loop {
            skip_separators(cur);
            let pos = cur.pos();
            if cur.eat(&Token::RBrace) {
                break;
            }
            if cur.is_keyword("treatment") {
                if self.treatment.is_some() {
                    return Err(ParseError::Repeated {
                        what: "treatment",
                        pos,
                    });
                }
                cur.bump();
                self.treatment_block(cur)?;
            } else if cur.is_keyword("unit") {
                if self.unit.is_some() {
                    return Err(ParseError::Repeated { what: "unit", pos });
                }
                cur.bump();
                self.unit_block(cur)?;
            } else if cur.is_keyword("randomize") {
                if self.randomize.is_some() {
                    return Err(ParseError::Repeated {
                        what: "randomize",
                        pos,
                    });
                }
                cur.bump();
                self.randomize_block(cur)?;
            } else if cur.is_keyword("interactions") {
                if self.policy.is_some() {
                    return Err(ParseError::Repeated {
                        what: "interactions",
                        pos,
                    });
                }
                cur.bump();
                cur.expect(Token::Colon, "`:`")?;
                self.interactions(cur)?;
            } else {
                return Err(cur.error(&[
                    "`treatment`",
                    "`unit`",
                    "`randomize`",
                    "`interactions`",
                    "`}`",
                ]));
            }
        }
        Ok(())
    }

    fn declare(&mut self, name: &str, role: DeclRole, pos: Position) -> Result<(), ParseError> {
        if KEYWORDS.contains(&name) {
            return Err(ParseError::ReservedName {
                name: name.to_string(),
                pos,
            });
        }
        if self.declared.contains_key(name) {
            return Err(ParseError::DuplicateFactor {
                name: name.to_string(),
                pos,
            });
        }
        self.declared.insert(name.to_string(), (role, pos));
        Ok(())
    }

    /// `Name : (fixed|random) Int`
    fn decl_head(
        &mut self,
        cur: &mut Cursor,
        role: DeclRole,
    ) -> Result<(String, Variability, u64, Position), ParseError> {
        let (name, pos) = cur.expect_ident("a factor name")?;
        cur.expect(Token::Colon, "`:`")?;
        let variability = if cur.is_keyword("fixed") {
            Variability::Fixed
        } else if cur.is_keyword("random") {
            Variability::Random
        } else {
            return Err(cur.error(&["`fixed`", "`random`"]));
        };
        cur.bump();
        let levels = match cur.peek() {
            Token::Int(n) => *n,
            _ => return Err(cur.error(&["a level count"])),
        };
        cur.bump();
        if levels == 0 {
            return Err(ParseError::InvalidLevels { name, pos });
        }
        self.declare(&name, role, pos)?;
        Ok((name, variability, levels, pos))
    }

    fn treatment_block(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        cur.expect(Token::LBrace, "`{`")?;
        let mut decls = Vec::new();
        let mut structure = None;
        loop {
            skip_separators(cur);
            if cur.eat(&Token::RBrace) {
                break;
            }
            if cur.is_keyword("structure") && *cur.peek_at(1) == Token::Colon {
                let pos = cur.pos();
                if structure.is_some() {
                    return Err(ParseError::Repeated {
                        what: "structure",
                        pos,
                    });
                }
                cur.bump();
                cur.bump();
                let expr_pos = cur.pos();
                structure = Some((parse_expr(cur, false)?, expr_pos));
                continue;
            }
            let (name, variability, levels, _) = self.decl_head(cur, DeclRole::Treatment)?;
            decls.push(FactorDecl::treatment(name, variability, levels));
        }
        self.treatment = Some((decls, structure));
        Ok(())
    }

    fn unit_block(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        cur.expect(Token::LBrace, "`{`")?;
        let mut decls: Vec<FactorDecl> = Vec::new();
        let mut response = None;
        loop {
            skip_separators(cur);
            if cur.eat(&Token::RBrace) {
                break;
            }
            if cur.is_keyword("response") && *cur.peek_at(1) == Token::Colon {
                let pos = cur.pos();
                if response.is_some() {
                    return Err(ParseError::Repeated {
                        what: "response",
                        pos,
                    });
                }
                cur.bump();
                cur.bump();
                let (name, pos) = cur.expect_ident("the response factor")?;
                response = Some((name, pos));
                continue;
            }
            let (name, variability, levels, _) = self.decl_head(cur, DeclRole::Unit)?;
            let mut parents = Vec::new();
            if cur.is_keyword("in") {
                cur.bump();
                loop {
                    let (parent, pos) = cur.expect_ident("a unit factor name")?;
                    match self.declared.get(&parent) {
                        Some((DeclRole::Unit, _)) if parent != name => {}
                        Some((DeclRole::Treatment, _)) => {
                            return Err(ParseError::WrongKind {
                                name: parent,
                                expected: "unit",
                                pos,
                            })
                        }
                        _ => {
                            return Err(ParseError::UnknownIdentifier { name: parent, pos });
                        }
                    }
                    if !parents.contains(&parent) {
                        parents.push(parent);
                    }
                    if *cur.peek() == Token::Colon && matches!(cur.peek_at(1), Token::Ident(_)) {
                        cur.bump();
                    } else {
                        break;
                    }
                }
            }
            decls.push(FactorDecl {
                name,
                variability,
                role: DeclRole::Unit,
                levels,
                parents,
            });
        }
        self.unit = Some((decls, response));
        Ok(())
    }

    fn randomize_block(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        cur.expect(Token::LBrace, "`{`")?;
        let mut pairs = Vec::new();
        loop {
            skip_separators(cur);
            if cur.eat(&Token::RBrace) {
                break;
            }
            let (t, pos) = cur.expect_ident("a treatment factor name")?;
            cur.expect(Token::Arrow, "`->`")?;
            let (u, _) = cur.expect_ident("a unit factor name")?;
            pairs.push((t, u, pos));
        }
        self.randomize = Some(pairs);
        Ok(())
    }

    fn interactions(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        if cur.is_keyword("none") {
            cur.bump();
            self.policy = Some((InteractionPolicy::None, Vec::new()));
            return Ok(());
        }
        if cur.is_keyword("all") {
            cur.bump();
            self.policy = Some((InteractionPolicy::All, Vec::new()));
            return Ok(());
        }
        let mut terms = Vec::new();
        let mut positions = Vec::new();
        loop {
            let pos = cur.pos();
            let (first, _) = cur.expect_ident("an interaction term such as `Block:A`")?;
            let mut term = vec![first];
            while *cur.peek() == Token::Colon {
                cur.bump();
                let (next, _) = cur.expect_ident("a factor name")?;
                term.push(next);
            }
            terms.push(term);
            positions.push(pos);
            cur.eat(&Token::Comma);
            // Another term follows only if an identifier that is not a block keyword comes next.
            match cur.peek() {
                Token::Ident(s) if !KEYWORDS.contains(&s.as_str()) => continue,
                _ => break,
            }
        }
        self.policy = Some((InteractionPolicy::Keep(terms), positions));
        Ok(())
    }

    fn resolve(&self, name: &str, pos: Position) -> Result<DeclRole, ParseError> {
        self.declared
            .get(name)
            .map(|(role, _)| *role)
            .ok_or_else(|| ParseError::UnknownIdentifier {
                name: name.to_string(),
                pos,
            })
    }

    fn finish(self) -> Result<DesignSpec, ParseError> {
        let (treatment_decls, structure) = self
            .treatment
            .clone()
            .ok_or(ParseError::MissingBlock("treatment"))?;
        let (unit_decls, response) = self.unit.clone().ok_or(ParseError::MissingBlock("unit"))?;
        let (treatment_expr, expr_pos) = structure.ok_or(ParseError::MissingStructure)?;
        let (response, response_pos) = response.ok_or(ParseError::MissingResponse)?;
        let randomize = self.randomize.clone().ok_or(ParseError::MissingRandomize)?;

        for leaf in treatment_expr.leaves() {
            self.resolve(&leaf, expr_pos)?;
        }
        if self.resolve(&response, response_pos)? != DeclRole::Unit {
            return Err(ParseError::WrongKind {
                name: response,
                expected: "unit",
                pos: response_pos,
            });
        }

        let mut randomization: Vec<(String, String)> = Vec::new();
        for (t, u, pos) in randomize {
            if self.resolve(&t, pos)? != DeclRole::Treatment {
                return Err(ParseError::WrongKind {
                    name: t,
                    expected: "treatment",
                    pos,
                });
            }
            if self.resolve(&u, pos)? != DeclRole::Unit {
                return Err(ParseError::WrongKind {
                    name: u,
                    expected: "unit",
                    pos,
                });
            }
            if randomization.iter().any(|(x, _)| *x == t) {
                return Err(ParseError::DuplicateRandomization { name: t, pos });
            }
            randomization.push((t, u));
        }

        let interaction_policy = match self.policy.clone() {
            None => InteractionPolicy::None,
            Some((InteractionPolicy::Keep(terms), positions)) => {
                for (term, pos) in terms.iter().zip(positions) {
                    for name in term {
                        self.resolve(name, pos)?;
                    }
                }
                InteractionPolicy::Keep(terms)
            }
            Some((p, _)) => p,
        };

        Ok(DesignSpec {
            name: self.name,
            treatment_decls,
            treatment_expr,
            unit_decls,
            response,
            randomization,
            interaction_policy,
        })
    }
}
