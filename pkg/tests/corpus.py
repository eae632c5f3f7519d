"""Cut-free programs and queries checked against the SLD oracle."""

# (program file, goal, engine options)
ORACLE_CORPUS = [
    ("ancestor_fig.pl", "ancestor(a,Z)", {"strategy": "eager"}),
    ("ancestor.pl", "ancestors(jon,L)", {"strategy": "eager"}),
    ("ancestor.pl", "ancestor(bob,Y)", {"strategy": "eager"}),
    ("parent.pl", "parent(X,mary)", {}),
    ("parent.pl", "parent(john,Y)", {}),
    ("parent.pl", "parent(X,Y)", {}),
    ("parent.pl", "parent(X,nobody)", {}),
    ("qsort.pl", "qsort(R)", {}),
    ("nreverse.pl", "nreverse(30,R)", {}),
    ("reverse.pl", "reverse(30,R)", {}),
    ("zebra.pl", "zebra(H)", {}),
    ("zebra.pl", "zebra(H)", {"strategy": "eager"}),
    ("queens.pl", "queens(5,Q)", {}),
    ("queens.pl", "queens(6,Q)", {}),
    ("houses.pl", "houses(H)", {}),
    ("houses.pl", "houses(H)", {"strategy": "eager"}),
    ("send.pl", "send(L)", {}),
    ("scanner.pl", "scanner(R)", {}),
    ("ppuzzle.pl", "ppuzzle(3,p(1,1),P)", {}),
    ("puzzle4x4.pl", "puzzle(P)", {}),
    ("kkqueens.pl", "kkqueens(5,S)", {}),
    ("serialise.pl", "serialise(R)", {}),
    ("deriv.pl", "deriv(A,B,C,D)", {}),
    ("query.pl", "query(Q)", {}),
    ("tak.pl", "tak(8,4,2,A)", {}),
    ("cal.pl", "cal(1,40,C)", {}),
]
