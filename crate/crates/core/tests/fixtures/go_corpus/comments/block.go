package comments

/*
func Fake() {
	this is a comment
*/

// func AlsoFake() {

func Real() int { /* } */ return 1 }

func Real2() int {
	// }
	x := 2 /* { */
	return x
}

/* func Hidden() { } */ func Visible() {}
